//! Black-box tests of the command-line interface: exit codes, error
//! wording, idempotence, and the interactive chat loop under piped input.

mod support;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use expertloop::corpus::LabelSets;

const BIN: &str = env!("CARGO_BIN_EXE_expertloop");

fn base_config(ws: &Path) -> String {
    format!(
        r#"workspace_root = "{ws}"

[prompt]
exemplars_file = "exemplars.json"

[expert]
kind = "mock"
cache_dir = "cache"

[selfchat]
max_turns = 4

[[selfchat.topics]]
name = "work stress"
openers = ["I lost my job recently."]
"#,
        ws = ws.display()
    )
}

/// A workspace with a raw corpus, an exemplar pool, and a mock-expert
/// configuration.
fn setup_workspace(conversations: usize) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().expect("tempdir");
    let ws = dir.path();
    let corpus = support::synthetic_corpus(conversations);
    fs::write(ws.join("corpus.jsonl"), support::to_raw_jsonl(&corpus)).expect("corpus");
    let pool = support::dialogue_pool(&LabelSets::default());
    fs::write(ws.join("exemplars.json"), serde_json::to_string_pretty(&pool).unwrap())
        .expect("exemplars");
    let config_path = ws.join("expertloop.toml");
    fs::write(&config_path, base_config(ws)).expect("config");
    (dir, config_path)
}

fn run(config: &Path, args: &[&str]) -> Output {
    Command::new(BIN).arg("--config").arg(config).args(args).output().expect("binary runs")
}

fn assert_code(output: &Output, expected: i32) {
    assert_eq!(
        output.status.code(),
        Some(expected),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

#[test]
fn help_and_version_exit_zero() {
    let out = Command::new(BIN).arg("--help").output().expect("binary runs");
    assert_code(&out, 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("ingest"));

    let out = Command::new(BIN).arg("--version").output().expect("binary runs");
    assert_code(&out, 0);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let (_dir, config) = setup_workspace(3);
    let out = run(&config, &["ingest", "--definitely-not-a-flag"]);
    assert_code(&out, 1);
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let out = Command::new(BIN)
        .args(["--config", "/nonexistent/expertloop.toml", "ingest"])
        .output()
        .expect("binary runs");
    assert_code(&out, 1);
    assert!(stderr(&out).contains("error:"), "stderr: {}", stderr(&out));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let (dir, config) = setup_workspace(3);
    let mut text = fs::read_to_string(&config).unwrap();
    text.push_str("\n[corpus]\nbogus_knob = 1\n");
    fs::write(&config, text).unwrap();

    let out = run(&config, &["ingest"]);
    assert_code(&out, 1);
    assert!(stderr(&out).contains("bogus_knob"), "stderr: {}", stderr(&out));
    drop(dir);
}

#[test]
fn malformed_corpus_line_is_cited_by_number() {
    let (dir, config) = setup_workspace(6);
    let corpus_path = dir.path().join("corpus.jsonl");
    let mut text = fs::read_to_string(&corpus_path).unwrap();
    text.push_str("{this is not json\n");
    fs::write(&corpus_path, text).unwrap();

    let out = run(&config, &["ingest"]);
    assert_code(&out, 2);
    assert!(stderr(&out).contains("line 7"), "stderr: {}", stderr(&out));
}

#[test]
fn invalid_split_name_is_a_usage_error() {
    let (_dir, config) = setup_workspace(3);
    let out = run(&config, &["annotate", "--split", "bogus"]);
    assert_code(&out, 1);
}

#[test]
fn annotate_without_an_exemplar_pool_is_a_usage_error() {
    let (dir, config) = setup_workspace(5);
    let text = base_config(dir.path()).replace("exemplars_file = \"exemplars.json\"\n", "");
    fs::write(&config, text).unwrap();

    assert_code(&run(&config, &["ingest"]), 0);
    let out = run(&config, &["annotate", "--split", "train"]);
    assert_code(&out, 1);
    assert!(stderr(&out).contains("exemplars"), "stderr: {}", stderr(&out));
}

#[test]
fn annotate_and_export_are_idempotent_with_a_warm_cache() {
    let (dir, config) = setup_workspace(10);
    let ws = dir.path();
    assert_code(&run(&config, &["ingest"]), 0);

    assert_code(&run(&config, &["annotate", "--split", "train"]), 0);
    let first = fs::read(ws.join("annotations/annotations-train.jsonl")).unwrap();
    assert_code(&run(&config, &["annotate", "--split", "train"]), 0);
    let second = fs::read(ws.join("annotations/annotations-train.jsonl")).unwrap();
    assert_eq!(first, second, "annotations changed between runs");

    assert_code(&run(&config, &["export-train", "--split", "train"]), 0);
    let first = fs::read(ws.join("training.jsonl")).unwrap();
    assert_code(&run(&config, &["export-train", "--split", "train"]), 0);
    let second = fs::read(ws.join("training.jsonl")).unwrap();
    assert_eq!(first, second, "training file changed between runs");
}

#[test]
fn selfchat_agent_protocol_failure_is_a_backend_error() {
    let (dir, config) = setup_workspace(3);
    // A supporter endpoint that answers 404 violates the agent contract.
    let server = support::spawn_server(vec![(404, "{}".to_string())]);
    let mut text = base_config(dir.path());
    text.push_str(&format!(
        "\n[selfchat.supporter]\nkind = \"http\"\nurl = \"{}\"\n",
        server.url
    ));
    fs::write(&config, text).unwrap();

    let out = run(&config, &["selfchat"]);
    assert_code(&out, 3);
    server.join();
}

#[test]
fn selfchat_agent_transport_failure_truncates_gracefully() {
    let (dir, config) = setup_workspace(3);
    // Nothing listens on this port: a connection failure is transient, so
    // the session is truncated and flagged rather than failed.
    let mut text = base_config(dir.path());
    text.push_str("\n[selfchat.supporter]\nkind = \"http\"\nurl = \"http://127.0.0.1:9/\"\n");
    fs::write(&config, text).unwrap();

    let out = run(&config, &["selfchat"]);
    assert_code(&out, 0);
    let transcript = fs::read_to_string(dir.path().join("selfchat/session-000.jsonl")).unwrap();
    let header: serde_json::Value =
        serde_json::from_str(transcript.lines().next().unwrap()).unwrap();
    let flags = header["flags"].as_array().unwrap();
    assert!(
        flags.iter().any(|f| f.as_str().unwrap_or_default().starts_with("truncated:")),
        "missing truncation flag in {header}"
    );
}

#[test]
fn eval_acute_accepts_csv_judgments() {
    use expertloop::acute::{
        build_tasks, default_question_bank, write_tasks_json, Choice, Judgment, TranscriptRef,
    };

    let (dir, config) = setup_workspace(3);
    let ws = dir.path();
    let refs = |prefix: &str| {
        vec![TranscriptRef { id: format!("{prefix}-0"), topic: "work stress".to_string() }]
    };
    let tasks = build_tasks(&refs("model"), &refs("human"), 5).unwrap();
    fs::create_dir_all(ws.join("acute")).unwrap();
    let mut tasks_file = Vec::new();
    write_tasks_json(&tasks, &mut tasks_file).unwrap();
    fs::write(ws.join("acute/tasks.json"), tasks_file).unwrap();

    let mut writer = csv::Writer::from_path(ws.join("judgments.csv")).unwrap();
    for question in default_question_bank().iter().filter(|q| q.selected) {
        for worker in 0..3 {
            writer
                .serialize(Judgment {
                    task_id: tasks[0].task_id.clone(),
                    worker_id: format!("worker-{worker}"),
                    question_id: question.id.clone(),
                    choice: Choice::Left,
                    justification: "left engages with the actual problem".to_string(),
                    duration_s: 420,
                    submitted_at: "2026-08-25T11:00:00Z".to_string(),
                })
                .unwrap();
        }
    }
    writer.flush().unwrap();
    drop(writer);

    let out = run(&config, &["eval-acute", ws.join("judgments.csv").to_str().unwrap()]);
    assert_code(&out, 0);
    assert!(ws.join("acute/acute-report.json").is_file());
}

#[test]
fn eval_reasoning_orphan_ids_are_a_data_error() {
    let (dir, config) = setup_workspace(3);
    let ws = dir.path();
    fs::write(ws.join("generated.jsonl"), "{\"id\": \"a\", \"text\": \"x\"}\n").unwrap();
    fs::write(ws.join("reference.jsonl"), "{\"id\": \"b\", \"text\": \"y\"}\n").unwrap();

    let out = run(
        &config,
        &[
            "eval-reasoning",
            ws.join("generated.jsonl").to_str().unwrap(),
            ws.join("reference.jsonl").to_str().unwrap(),
        ],
    );
    assert_code(&out, 2);
    let err = stderr(&out);
    assert!(err.contains('a') && err.contains('b'), "stderr: {err}");
}

fn run_chat_with_input(config: &Path, input: &str) -> Output {
    let mut child = Command::new(BIN)
        .arg("--config")
        .arg(config)
        .arg("chat")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.as_mut().expect("stdin piped").write_all(input.as_bytes()).expect("write stdin");
    child.wait_with_output().expect("chat finishes")
}

#[test]
fn chat_scripted_session_saves_a_transcript() {
    let (dir, config) = setup_workspace(3);
    let out = run_chat_with_input(&config, "I feel really low today.\nI keep waking up at night.\n");
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("supporter>"), "stdout: {stdout}");
    assert!(stdout.contains("saved 4 turns"), "stdout: {stdout}");

    let transcript = fs::read_to_string(dir.path().join("chat-transcript.jsonl")).unwrap();
    assert_eq!(transcript.lines().count(), 5, "header plus four turns");
}

#[test]
fn chat_with_no_input_still_exits_cleanly() {
    let (dir, config) = setup_workspace(3);
    let out = run_chat_with_input(&config, "");
    assert_code(&out, 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("saved 0 turns"));
    assert!(dir.path().join("chat-transcript.jsonl").is_file());
}
