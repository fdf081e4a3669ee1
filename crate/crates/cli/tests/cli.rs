//! End-to-end runs of the `ideation` binary against the demo corpus.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ideation_core::gateway::{Script, FAIL_TEMPLATE};

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/demo")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ideation"))
}

fn run_ok(command: &mut Command) -> Output {
    let output = command.output().expect("binary runs");
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn ingest(embeddings: &Path) -> Output {
    run_ok(bin()
        .arg("ingest")
        .arg("--publications")
        .arg(demo_dir().join("publications.ldjson"))
        .arg("--researchers")
        .arg(demo_dir().join("researchers.ldjson"))
        .arg("--embeddings")
        .arg(embeddings))
}

#[test]
fn ingest_writes_one_embedding_per_publication() {
    let dir = tempfile::tempdir().unwrap();
    let embeddings = dir.path().join("embeddings.ldjson");
    let output = ingest(&embeddings);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("14 publications / 6 researchers"), "{stdout}");
    let lines = std::fs::read_to_string(&embeddings).unwrap();
    assert_eq!(lines.lines().count(), 14);
}

fn run_experiment(embeddings: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut command = bin();
    command
        .arg("run")
        .arg("--publications")
        .arg(demo_dir().join("publications.ldjson"))
        .arg("--researchers")
        .arg(demo_dir().join("researchers.ldjson"))
        .arg("--embeddings")
        .arg(embeddings)
        .arg("--out")
        .arg(out)
        .args(["--team-size", "4", "--rounds", "1", "--top-k", "3", "--trials", "2", "--seed", "9"])
        .args(extra);
    command.output().expect("binary runs")
}

#[test]
fn run_produces_deterministic_reports_and_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let embeddings = dir.path().join("embeddings.ldjson");
    ingest(&embeddings);

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let output = run_experiment(&embeddings, &out_a, &[]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("completed 2/2 trials"), "{stdout}");

    for file in ["trial_000.transcript.ldjson", "trial_001.transcript.ldjson", "report.ldjson", "report.md"] {
        assert!(out_a.join(file).exists(), "missing {file}");
    }

    let output = run_experiment(&embeddings, &out_b, &[]);
    assert!(output.status.success());
    for file in ["trial_000.transcript.ldjson", "report.ldjson", "report.md"] {
        assert_eq!(
            std::fs::read(out_a.join(file)).unwrap(),
            std::fs::read(out_b.join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }
}

#[test]
fn ablation_flags_are_echoed_in_report_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let embeddings = dir.path().join("embeddings.ldjson");
    ingest(&embeddings);
    let out = dir.path().join("out");
    let output = run_experiment(&embeddings, &out, &["--no-discussion", "--no-vote"]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let report = std::fs::read_to_string(out.join("report.ldjson")).unwrap();
    let aggregate = report
        .lines()
        .find(|l| l.contains("\"record\":\"aggregate\""))
        .expect("aggregate line");
    assert!(aggregate.contains("\"enable_discussion\":false"));
    assert!(aggregate.contains("\"enable_vote\":false"));
}

#[test]
fn config_file_is_used_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let embeddings = dir.path().join("embeddings.ldjson");
    ingest(&embeddings);
    let out = dir.path().join("from_config");
    let config = dir.path().join("experiment.toml");
    std::fs::write(
        &config,
        format!(
            "[corpus]\npublications = {:?}\nresearchers = {:?}\nembeddings = {:?}\n\n\
             [run]\nteam_size = 4\nrounds = 1\ntop_k = 3\ntrials = 5\nseed = 9\n\n\
             [output]\ndir = {:?}\n",
            demo_dir().join("publications.ldjson"),
            demo_dir().join("researchers.ldjson"),
            embeddings,
            out,
        ),
    )
    .unwrap();
    // --trials overrides the file's 5
    let output = bin()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .args(["--trials", "1"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("completed 1/1 trials"), "{stdout}");
    assert!(out.join("trial_000.transcript.ldjson").exists());
    assert!(!out.join("trial_001.transcript.ldjson").exists());
}

#[test]
fn aborted_trials_exit_nonzero_and_resume_completes() {
    let dir = tempfile::tempdir().unwrap();
    let embeddings = dir.path().join("embeddings.ldjson");
    ingest(&embeddings);
    let out = dir.path().join("out");

    let mut failing = Script::protocol_demo();
    failing.set("SYNTH", FAIL_TEMPLATE);
    let failing_path = dir.path().join("failing.ldjson");
    failing.save(&failing_path).unwrap();

    let output = run_experiment(
        &embeddings,
        &out,
        &["--script", failing_path.to_str().unwrap()],
    );
    assert!(!output.status.success(), "failing script must abort trials");
    assert!(out.join("trial_000.checkpoint.json").exists());
    assert!(!out.join("trial_000.transcript.ldjson").exists());

    let good_path = dir.path().join("good.ldjson");
    Script::protocol_demo().save(&good_path).unwrap();
    let output = run_experiment(
        &embeddings,
        &out,
        &["--script", good_path.to_str().unwrap(), "--resume"],
    );
    assert!(
        output.status.success(),
        "resume failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(out.join("trial_000.transcript.ldjson").exists());
    assert!(!out.join("trial_000.checkpoint.json").exists(), "stale checkpoint removed");
}

#[test]
fn score_prints_metric_report() {
    let dir = tempfile::tempdir().unwrap();
    let embeddings = dir.path().join("embeddings.ldjson");
    ingest(&embeddings);
    let abstract_path = dir.path().join("abstract.txt");
    std::fs::write(
        &abstract_path,
        "We combine retrieval-grounded idea generation with confidence-weighted peer ranking to surface novel cross-domain study designs.",
    )
    .unwrap();
    let output = run_ok(bin()
        .arg("score")
        .arg("--abstract")
        .arg(&abstract_path)
        .arg("--publications")
        .arg(demo_dir().join("publications.ldjson"))
        .arg("--researchers")
        .arg(demo_dir().join("researchers.ldjson"))
        .arg("--embeddings")
        .arg(&embeddings));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("\"hd_raw\""), "{stdout}");
    assert!(stdout.contains("\"neighbor_ids_contemporary\""), "{stdout}");
    assert!(stdout.contains("HD "), "{stdout}");
}

#[test]
fn report_rerenders_identical_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let embeddings = dir.path().join("embeddings.ldjson");
    ingest(&embeddings);
    let out = dir.path().join("out");
    let output = run_experiment(&embeddings, &out, &[]);
    assert!(output.status.success());

    let rerender = dir.path().join("rerender");
    run_ok(bin()
        .arg("report")
        .arg("--input")
        .arg(&out)
        .arg("--out")
        .arg(&rerender)
        .args(["--format", "markdown,structured"]));
    assert_eq!(
        std::fs::read(out.join("report.md")).unwrap(),
        std::fs::read(rerender.join("report.md")).unwrap()
    );
    assert_eq!(
        std::fs::read(out.join("report.ldjson")).unwrap(),
        std::fs::read(rerender.join("report.ldjson")).unwrap()
    );
}

#[test]
fn missing_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .arg("run")
        .arg("--publications")
        .arg(dir.path().join("nope.ldjson"))
        .arg("--researchers")
        .arg(dir.path().join("nope2.ldjson"))
        .arg("--embeddings")
        .arg(dir.path().join("nope3.ldjson"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!output.status.success());
}
