//! Session files: round trips and rejection of malformed input.

use qseal_lab::experiment::run_session_trial;
use qseal_lab::formats::{FormatError, SessionFile};
use qseal_lab::{ExperimentSpec, Kind, StrategyName};

fn session_text(kind: Kind, strategy: StrategyName, trial: u64) -> String {
    let mut spec = ExperimentSpec::new(kind);
    spec.trials = 100;
    spec.strategy = Some(strategy);
    let plan = spec.plan().unwrap();
    let (_, outcome) = run_session_trial(&plan, &plan.cells[0], trial).unwrap();
    SessionFile {
        transcript: outcome.transcript,
        record: outcome.owner_record,
    }
    .to_text()
}

#[test]
fn round_trips_are_exact() {
    for kind in [Kind::Basic, Kind::Advanced] {
        for strategy in [StrategyName::Honest, StrategyName::Flip, StrategyName::RandomIndices] {
            for trial in 0..5 {
                let text = session_text(kind, strategy, trial);
                let file = SessionFile::from_text(&text).unwrap();
                assert_eq!(file.to_text(), text);
                assert_eq!(SessionFile::from_text(&file.to_text()).unwrap(), file);
            }
        }
    }
}

#[test]
fn owner_record_is_optional() {
    let text = session_text(Kind::Basic, StrategyName::Honest, 0);
    let bare: String = text
        .lines()
        .filter(|l| !l.starts_with("seal\t") && !l.starts_with("qubit\t"))
        .map(|l| format!("{l}\n"))
        .collect();
    let file = SessionFile::from_text(&bare).unwrap();
    assert!(file.record.is_none());
    assert_eq!(file.to_text(), bare);
}

fn line_error(text: &str) -> usize {
    match SessionFile::from_text(text) {
        Err(FormatError::Line { line, .. }) => line,
        other => panic!("expected a line error, got {other:?}"),
    }
}

#[test]
fn malformed_files_are_rejected() {
    let text = session_text(Kind::Advanced, StrategyName::Honest, 1);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(line_error(&text.replacen("advanced", "quantum", 1)), 1);
    assert_eq!(line_error(&lines[1..].join("\n")), 1);

    let mut swapped = lines.clone();
    swapped.swap(2, 3);
    assert_eq!(line_error(&swapped.join("\n")), 3);

    let bad_bit = text
        .replacen("qubit\t0\t0\t", "qubit\t0\t2\t", 1)
        .replacen("qubit\t0\t1\t", "qubit\t0\t2\t", 1);
    assert_eq!(line_error(&bad_bit), 3);

    let short: Vec<&str> = lines
        .iter()
        .copied()
        .filter(|l| !l.starts_with("qubit\t63\t"))
        .collect();
    assert_eq!(line_error(&short.join("\n")), 0);

    let mut garbled = lines.clone();
    let last = garbled.len() - 1;
    garbled[last] = "verdict\tnot-a-step";
    assert!(matches!(
        SessionFile::from_text(&garbled.join("\n")),
        Err(FormatError::Transcript(_))
    ));
}
