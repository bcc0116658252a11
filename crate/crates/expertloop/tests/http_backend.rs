//! Wire-level tests for the HTTP expert backend and HTTP dialogue agent,
//! against a local single-purpose server.

mod support;

use expertloop::corpus::{Role, Utterance};
use expertloop::expert::{consult, DecodingParams, ExpertBackend, ExpertError, HttpExpert, RetryPolicy};
use expertloop::selfchat::{AgentEndpoint, AgentError, HttpAgent};

fn reply(text: &str) -> String {
    serde_json::json!({ "text": text }).to_string()
}

#[test]
fn expert_round_trip_carries_the_full_request() {
    let server = support::spawn_server(vec![(200, reply("The seeker feels calm."))]);
    let backend = HttpExpert::new(&server.url);
    let request = DecodingParams::default().request("describe the seeker");

    let consultation =
        consult(&backend, &request, &RetryPolicy::immediate(3), None).expect("consult succeeds");
    assert_eq!(consultation.raw_text, "The seeker feels calm.");
    assert!(!consultation.from_cache);
    assert_eq!(consultation.backend_id, format!("http:{}", server.url));

    let captured = server.join();
    assert_eq!(captured.len(), 1);
    assert!(captured[0].head.starts_with("POST /complete HTTP/1.1\r\n"), "{}", captured[0].head);
    let body: serde_json::Value = serde_json::from_str(&captured[0].body).expect("json body");
    assert_eq!(body["prompt"], "describe the seeker");
    assert_eq!(body["max_tokens"], 256);
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["stop"], serde_json::json!(["\n\n"]));
}

#[test]
fn expert_retries_server_errors_until_success() {
    let server = support::spawn_server(vec![
        (500, "{}".to_string()),
        (503, "{}".to_string()),
        (200, reply("recovered")),
    ]);
    let backend = HttpExpert::new(&server.url);
    let request = DecodingParams::default().request("p");

    let consultation =
        consult(&backend, &request, &RetryPolicy::immediate(3), None).expect("retries succeed");
    assert_eq!(consultation.raw_text, "recovered");
    assert_eq!(server.join().len(), 3, "two failures and the success each hit the server");
}

#[test]
fn expert_client_errors_are_not_retried() {
    let server = support::spawn_server(vec![(400, "{}".to_string())]);
    let backend = HttpExpert::new(&server.url);
    let request = DecodingParams::default().request("p");

    let error = consult(&backend, &request, &RetryPolicy::immediate(3), None)
        .expect_err("client error fails");
    assert!(matches!(error, ExpertError::Protocol { .. }), "got {error:?}");
    assert_eq!(server.join().len(), 1, "a protocol error must not be retried");
}

#[test]
fn expert_rejects_replies_without_a_text_field() {
    let server = support::spawn_server(vec![(200, r#"{"output": "x"}"#.to_string())]);
    let backend = HttpExpert::new(&server.url);

    let error = backend
        .complete(&DecodingParams::default().request("p"))
        .expect_err("contract violation fails");
    match error {
        ExpertError::Protocol { message } => assert!(message.contains("text"), "{message}"),
        other => panic!("expected protocol error, got {other:?}"),
    }
    server.join();
}

#[test]
fn expert_reads_the_bearer_token_at_request_time() {
    std::env::set_var("EXPERTLOOP_TEST_TOKEN_RT", "tok-123");
    let server = support::spawn_server(vec![(200, reply("ok"))]);
    let backend = HttpExpert::new(&server.url).with_auth_env("EXPERTLOOP_TEST_TOKEN_RT");

    backend.complete(&DecodingParams::default().request("p")).expect("authorized call");
    let captured = server.join();
    assert_eq!(captured[0].header("authorization"), Some("Bearer tok-123"));
}

#[test]
fn expert_missing_token_variable_fails_before_sending() {
    let server = support::spawn_server(Vec::new());
    let backend = HttpExpert::new(&server.url).with_auth_env("EXPERTLOOP_TEST_TOKEN_UNSET");

    let error = backend
        .complete(&DecodingParams::default().request("p"))
        .expect_err("unset variable fails");
    assert!(matches!(error, ExpertError::Protocol { .. }), "got {error:?}");
    assert!(server.join().is_empty(), "no request may leave the process");
}

#[test]
fn agent_round_trip_sends_history_and_reasoning() {
    let server =
        support::spawn_server(vec![(200, r#"{"text": "I hear you.", "end": false}"#.to_string())]);
    let agent = HttpAgent::new(&server.url);
    let history = [
        Utterance::new(Role::Seeker, "I lost my job."),
        Utterance::new(Role::Supporter, "That sounds hard."),
    ];

    let turn = agent
        .next_turn(Role::Supporter, &history, Some("The seeker feels anxious."))
        .expect("agent replies");
    assert_eq!(turn.text, "I hear you.");
    assert!(!turn.end);

    let captured = server.join();
    let body: serde_json::Value = serde_json::from_str(&captured[0].body).expect("json body");
    assert_eq!(body["history"][0]["speaker"], "seeker");
    assert_eq!(body["history"][0]["text"], "I lost my job.");
    assert_eq!(body["history"][1]["speaker"], "supporter");
    assert_eq!(body["reasoning"], "The seeker feels anxious.");
}

#[test]
fn agent_server_errors_are_transport_failures() {
    let server = support::spawn_server(vec![(503, "{}".to_string())]);
    let agent = HttpAgent::new(&server.url);

    let error =
        agent.next_turn(Role::Supporter, &[], None).expect_err("server failure surfaces");
    assert!(matches!(error, AgentError::Transport { .. }), "got {error:?}");
    server.join();
}

#[test]
fn agent_malformed_reply_is_a_protocol_failure() {
    let server = support::spawn_server(vec![(200, r#"{"text": "no end flag"}"#.to_string())]);
    let agent = HttpAgent::new(&server.url);

    let error =
        agent.next_turn(Role::Supporter, &[], None).expect_err("contract violation surfaces");
    assert!(matches!(error, AgentError::Protocol { .. }), "got {error:?}");
    server.join();
}
