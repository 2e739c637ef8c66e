use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use prefsynth_cli::api::SCHEMAS;
use prefsynth_cli::jobs::JobRegistry;
use prefsynth_core::fixtures::two_road;
use prefsynth_core::io::ModelDoc;
use reqwest::StatusCode;
use serde_json::{json, Value};

struct Server {
    base: String,
    handle: tokio::task::JoinHandle<()>,
}

impl Drop for Server {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

async fn start(data_dir: Option<&Path>, concurrency: usize, capacity: usize) -> Server {
    let jobs = JobRegistry::open(data_dir, concurrency, capacity).unwrap();
    jobs.resume().unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr: SocketAddr = listener.local_addr().unwrap();
    let app = prefsynth_cli::router(jobs, None);
    let handle = tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    Server {
        base: format!("http://{addr}"),
        handle,
    }
}

fn check_schema(name: &str, doc: &Value) {
    let (_, text) = SCHEMAS.iter().find(|(n, _)| *n == name).unwrap();
    let schema: Value = serde_json::from_str(text).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}\n{doc:#}");
}

async fn get(base: &str, path: &str) -> (StatusCode, Value) {
    let r = reqwest::get(format!("{base}{path}")).await.unwrap();
    let status = r.status();
    (status, r.json().await.unwrap())
}

async fn post(base: &str, path: &str, body: &str) -> (StatusCode, Value) {
    let r = reqwest::Client::new()
        .post(format!("{base}{path}"))
        .header("content-type", "application/json")
        .body(body.to_string())
        .send()
        .await
        .unwrap();
    let status = r.status();
    (status, r.json().await.unwrap())
}

async fn wait_for(base: &str, id: &str) -> Value {
    for _ in 0..2000 {
        let (status, doc) = get(base, &format!("/api/jobs/{id}")).await;
        assert_eq!(status, StatusCode::OK);
        if doc["status"] == "done" || doc["status"] == "failed" {
            return doc;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("job {id} did not finish");
}

#[tokio::test(flavor = "multi_thread")]
async fn maps_listing() {
    let s = start(None, 2, 8).await;
    let (status, doc) = get(&s.base, "/api/maps").await;
    assert_eq!(status, StatusCode::OK);
    check_schema("maps", &doc);
    let ids: Vec<&str> = doc["maps"].as_array().unwrap().iter().map(|m| m["id"].as_str().unwrap()).collect();
    assert!(ids.contains(&"two-road") && ids.contains(&"grid3x3"));
}

#[tokio::test(flavor = "multi_thread")]
async fn elicit_and_aggregate() {
    let s = start(None, 2, 8).await;
    let (status, doc) = post(&s.base, "/api/elicit", r#"{"method":"likert","data":[5,5]}"#).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc, json!({"weights": [0.5, 0.5]}));
    check_schema("elicit", &doc);

    let pairwise = r#"{"method":"pairwise_routes","data":{"n":2,"choices":[{"i":0,"j":1,"preferred":1}]}}"#;
    let (status, doc) = post(&s.base, "/api/elicit", pairwise).await;
    assert_eq!(status, StatusCode::OK);
    check_schema("elicit", &doc);

    let (status, doc) = post(&s.base, "/api/elicit", r#"{"method":"likert","data":[0,5]}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    check_schema("error", &doc);
    let (status, _) = post(&s.base, "/api/elicit", "{not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post(&s.base, "/api/elicit", r#"{"method":"telepathy","data":[]}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, doc) = post(&s.base, "/api/preferences/aggregate", r#"{"vectors":[[0.3,0.7],[0.5,0.5]]}"#).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc, json!({"lower": [0.3, 0.5], "upper": [0.5, 0.7]}));
    check_schema("interval", &doc);
    let (status, _) = post(&s.base, "/api/preferences/aggregate", r#"{"vectors":[]}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post(&s.base, "/api/preferences/aggregate", r#"{"vectors":[[0.3,0.3]]}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn synthesize_two_road_job() {
    let s = start(None, 2, 8).await;
    let body = r#"{"map":"two-road","interval":{"lower":[0.2,0.2],"upper":[0.8,0.8]}}"#;
    let (status, accepted) = post(&s.base, "/api/synthesize", body).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    check_schema("job-accepted", &accepted);
    let job = wait_for(&s.base, accepted["id"].as_str().unwrap()).await;
    check_schema("job", &job);
    assert_eq!(job["status"], "done");
    assert_eq!(job["result"]["penalty"], 0);
    assert_eq!(job["result"]["multiStrategy"]["s0"], json!(["short", "long"]));

    // A model document works the same way.
    let doc = serde_json::to_value(ModelDoc::from_model(&two_road())).unwrap();
    let body = json!({"model": doc, "property": "dist:min,risk:min", "interval": {"lower": [0.2, 0.2], "upper": [0.8, 0.8]}});
    let (status, accepted) = post(&s.base, "/api/synthesize", &body.to_string()).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let job = wait_for(&s.base, accepted["id"].as_str().unwrap()).await;
    assert_eq!(job["result"]["penalty"], 0);
}

#[tokio::test(flavor = "multi_thread")]
async fn synthesize_grid_overlay() {
    let s = start(None, 2, 8).await;
    let body = r#"{"map":"grid3x3","interval":{"lower":[0.1,0.1],"upper":[0.9,0.9]}}"#;
    let (_, accepted) = post(&s.base, "/api/synthesize", body).await;
    let job = wait_for(&s.base, accepted["id"].as_str().unwrap()).await;
    check_schema("job", &job);
    let result = &job["result"];
    let starred = result["overlay"]["cells"].as_array().unwrap().iter().filter(|c| c["permissive"] == true).count();
    assert_eq!(starred, result["permissiveStates"].as_array().unwrap().len());
    assert!(starred > 0);
}

#[tokio::test(flavor = "multi_thread")]
async fn synthesize_errors() {
    let s = start(None, 2, 8).await;
    let cases = [
        (r#"{"map":"two-road","interval":{"lower":[0.7,0.7],"upper":[0.9,0.9]}}"#, StatusCode::CONFLICT),
        (r#"{"map":"atlantis","interval":{"lower":[0.5,0.5],"upper":[0.5,0.5]}}"#, StatusCode::NOT_FOUND),
        (r#"{"map":"two-road"}"#, StatusCode::BAD_REQUEST),
        (r#"{"interval":{"lower":[0.5,0.5],"upper":[0.5,0.5]}}"#, StatusCode::BAD_REQUEST),
        (r#"{"map":"two-road","interval":{"lower":[0.5],"upper":[0.5]},"extra":1}"#, StatusCode::BAD_REQUEST),
        (r#"{"grid":"S#D","interval":{"lower":[0.5,0.5],"upper":[0.5,0.5]}}"#, StatusCode::BAD_REQUEST),
    ];
    for (body, expected) in cases {
        let (status, doc) = post(&s.base, "/api/synthesize", body).await;
        assert_eq!(status, expected, "{body}");
        check_schema("error", &doc);
    }
    let (status, doc) = get(&s.base, "/api/jobs/unknown").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    check_schema("error", &doc);
}

#[tokio::test(flavor = "multi_thread")]
async fn queue_full_is_503() {
    let s = start(None, 1, 1).await;
    // Runs for seconds, capped by the time limit, so it is still active
    // when the second request arrives.
    let body = r#"{"map":"delivery","interval":{"lower":[0.0,0.0,0.0],"upper":[1.0,1.0,1.0]},"timeLimitSecs":1.0}"#;
    let (status, first) = post(&s.base, "/api/synthesize", body).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let (status, doc) = post(&s.base, "/api/synthesize", body).await;
    let job = wait_for(&s.base, first["id"].as_str().unwrap()).await;
    assert!(job["status"] == "done" || job["status"] == "failed");
    if status != StatusCode::ACCEPTED {
        assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
        check_schema("error", &doc);
    } else {
        panic!("second job accepted with capacity 1 while the first was {:?}", job["status"]);
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn pareto_endpoint() {
    let s = start(None, 2, 8).await;
    let (status, doc) = get(&s.base, "/api/pareto?map=two-road&w=1,0").await;
    assert_eq!(status, StatusCode::OK);
    check_schema("pareto", &doc);
    assert_eq!(doc["point"], json!([1.0, 1.0]));
    assert_eq!(doc["strategy"]["s0"], "short");

    let (status, doc) = get(&s.base, "/api/pareto?map=grid3x3&w=0.1,0.9").await;
    assert_eq!(status, StatusCode::OK);
    check_schema("pareto", &doc);
    assert_eq!(doc["route"]["routes"].as_array().unwrap().len(), 1);

    for (q, code) in [
        ("map=two-road&w=0.5", StatusCode::BAD_REQUEST),
        ("map=two-road&w=a,b", StatusCode::BAD_REQUEST),
        ("map=two-road", StatusCode::BAD_REQUEST),
        ("map=nowhere&w=0.5,0.5", StatusCode::NOT_FOUND),
    ] {
        let (status, doc) = get(&s.base, &format!("/api/pareto?{q}")).await;
        assert_eq!(status, code, "{q}");
        check_schema("error", &doc);
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn schemas_are_published() {
    let s = start(None, 2, 8).await;
    for (name, _) in SCHEMAS {
        let (status, doc) = get(&s.base, &format!("/api/schemas/{name}")).await;
        assert_eq!(status, StatusCode::OK);
        assert!(jsonschema::validator_for(&doc).is_ok(), "{name}");
    }
    let (status, _) = get(&s.base, "/api/schemas/nothing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn replay_after_restart() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{"map":"grid3x3","interval":{"lower":[0.3,0.3],"upper":[0.7,0.7]}}"#;
    let (id, before) = {
        let s = start(Some(dir.path()), 2, 8).await;
        let (_, accepted) = post(&s.base, "/api/synthesize", body).await;
        let id = accepted["id"].as_str().unwrap().to_string();
        (id.clone(), wait_for(&s.base, &id).await)
    };
    let s = start(Some(dir.path()), 2, 8).await;
    let (status, after) = get(&s.base, &format!("/api/jobs/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(before, after);

    // New ids continue after the replayed ones.
    let (_, accepted) = post(&s.base, "/api/synthesize", body).await;
    assert_ne!(accepted["id"].as_str().unwrap(), id);
    let second = wait_for(&s.base, accepted["id"].as_str().unwrap()).await;
    assert_eq!(second["result"]["multiStrategy"], before["result"]["multiStrategy"]);
}

#[tokio::test(flavor = "multi_thread")]
async fn unfinished_jobs_resume() {
    let dir = tempfile::tempdir().unwrap();
    let record = json!({
        "id": "job-7",
        "request": {"map": "two-road", "interval": {"lower": [0.2, 0.2], "upper": [0.8, 0.8]}},
        "status": "running",
        "createdAt": 0.0,
        "startedAt": 1.0
    });
    std::fs::write(dir.path().join("jobs.jsonl"), format!("{record}\n{{torn")).unwrap();
    let s = start(Some(dir.path()), 2, 8).await;
    let job = wait_for(&s.base, "job-7").await;
    assert_eq!(job["status"], "done");
    assert_eq!(job["result"]["penalty"], 0);
}
