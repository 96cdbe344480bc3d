use std::path::PathBuf;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use harmonize_core::io::{open_source, SourceSpec};
use harmonize_core::pipeline::{read_sheets, run_recode, OutputSpec, RecodeJob};
use harmonize_core::summarize::summarize_variable;
use harmonize_service::{router, AppState, ServiceConfig};

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn app_with(config: ServiceConfig) -> (Router, AppState) {
    let state = AppState::new(config).unwrap();
    (router(state.clone()), state)
}

fn app() -> Router {
    app_with(ServiceConfig::default()).0
}

enum Payload {
    None,
    Json(Value),
    Csv(Vec<u8>),
}

async fn call(app: &Router, method: Method, uri: &str, payload: Payload) -> (StatusCode, Bytes) {
    let builder = Request::builder().method(method).uri(uri);
    let req = match payload {
        Payload::None => builder.body(Body::empty()),
        Payload::Json(v) => builder
            .header("content-type", "application/json")
            .body(Body::from(v.to_string())),
        Payload::Csv(b) => builder.header("content-type", "text/csv").body(Body::from(b)),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes())
}

fn json_of(bytes: &Bytes) -> Value {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("not JSON ({e}): {}", String::from_utf8_lossy(bytes)))
}

async fn open_paquid(app: &Router) -> String {
    let (status, body) = call(
        app,
        Method::POST,
        "/sessions",
        Payload::Json(json!({ "format": "csv", "location": data("paquid.csv"), "name": "paquid" })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&body));
    let v = json_of(&body);
    assert_eq!(v["columns"].as_array().unwrap().len(), 12);
    v["sessionId"].as_str().unwrap().to_string()
}

/// Sheet rows as `column -> cell` maps, in file order.
fn rows_of(path: &str) -> Vec<serde_json::Map<String, Value>> {
    let text = std::fs::read_to_string(data(path)).unwrap();
    let mut rdr = csv_lines(&text);
    let header = rdr.remove(0);
    rdr.into_iter()
        .map(|cells| {
            header
                .iter()
                .zip(cells)
                .filter(|(_, c)| !c.is_empty())
                .map(|(h, c)| (h.clone(), Value::String(c)))
                .collect()
        })
        .collect()
}

/// Minimal CSV splitter for the shipped sheets (quoted cells, no embedded
/// quotes or newlines).
fn csv_lines(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let mut cells = Vec::new();
            let mut cur = String::new();
            let mut quoted = false;
            for ch in line.chars() {
                match ch {
                    '"' => quoted = !quoted,
                    ',' if !quoted => cells.push(std::mem::take(&mut cur)),
                    c => cur.push(c),
                }
            }
            cells.push(cur);
            cells
        })
        .collect()
}

async fn wait_for(app: &Router, job: &str) -> Value {
    for _ in 0..600 {
        let (status, body) = call(app, Method::GET, &format!("/jobs/{job}"), Payload::None).await;
        assert_eq!(status, StatusCode::OK);
        let v = json_of(&body);
        match v["state"].as_str().unwrap() {
            "succeeded" | "failed" => return v,
            _ => tokio::time::sleep(Duration::from_millis(20)).await,
        }
    }
    panic!("job {job} did not finish");
}

fn mmse_cep_spec() -> Value {
    serde_json::from_slice(&std::fs::read(data("derived/MMSE-CEP.json")).unwrap()).unwrap()
}

#[tokio::test]
async fn summary_matches_engine() {
    let app = app();
    let id = open_paquid(&app).await;
    let (status, body) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/summary/male?k=5"),
        Payload::None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let direct = summarize_variable(open_source(&SourceSpec::csv(data("paquid.csv"))).unwrap(), "male", 5).unwrap();
    assert_eq!(json_of(&body), serde_json::to_value(direct).unwrap());

    let (status, body) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/summary/nope"),
        Payload::None,
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json_of(&body)["code"], "UnknownColumn");
}

#[tokio::test]
async fn open_errors() {
    let app = app();
    let (status, body) = call(
        &app,
        Method::POST,
        "/sessions",
        Payload::Json(json!({ "format": "csv", "location": "/no/such/file.csv" })),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json_of(&body)["code"], "NotFound");

    let (status, body) = call(
        &app,
        Method::POST,
        "/sessions",
        Payload::Json(json!({ "format": "sas7bdat", "location": data("paquid.csv") })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json_of(&body)["code"], "UnsupportedFormat");

    // ragged rows surface when the data is read
    let (status, body) = call(
        &app,
        Method::POST,
        "/sessions",
        Payload::Json(json!({ "upload": "a,b\n1\n" })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let ragged = json_of(&body)["sessionId"].as_str().unwrap().to_string();
    let (status, body) = call(
        &app,
        Method::GET,
        &format!("/sessions/{ragged}/summary/a"),
        Payload::None,
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json_of(&body)["code"], "BadFormat");

    let (status, body) = call(&app, Method::GET, "/sessions/zzz", Payload::None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let v = json_of(&body);
    assert_eq!(v["code"], "UnknownSession");
    assert!(v["message"].as_str().unwrap().contains("zzz"));
}

#[tokio::test]
async fn upload_and_cap() {
    let (app, _) = app_with(ServiceConfig {
        upload_limit: 64,
        ..ServiceConfig::default()
    });
    let (status, body) = call(
        &app,
        Method::POST,
        "/sessions",
        Payload::Json(json!({ "upload": "x,y\n1,2\n3,4\n" })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(json_of(&body)["columns"], json!(["x", "y"]));

    let big = "x\n".to_string() + &"1\n".repeat(100);
    let (status, body) = call(&app, Method::POST, "/sessions", Payload::Json(json!({ "upload": big }))).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(json_of(&body)["code"], "UploadTooLarge");
}

#[tokio::test]
async fn sheet_put_get_and_validation() {
    let app = app();
    let id = open_paquid(&app).await;
    let details = std::fs::read(data("sheets/details.csv")).unwrap();
    let (status, body) = call(
        &app,
        Method::PUT,
        &format!("/sessions/{id}/sheets/details"),
        Payload::Csv(details),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    // no variable sheet yet
    assert_eq!(json_of(&body)["report"]["ok"], false);

    let vars = std::fs::read(data("sheets/variables.csv")).unwrap();
    let (status, body) = call(
        &app,
        Method::PUT,
        &format!("/sessions/{id}/sheets/variables"),
        Payload::Csv(vars),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let v = json_of(&body);
    assert_eq!(v["report"]["ok"], true, "{v}");
    assert_eq!(v["variables"], 4);
    assert_eq!(v["detailsRows"], 10);

    let (status, body) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/sheets/details"),
        Payload::None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (parsed_vs, parsed_ds) = read_sheets(&std::fs::read(data("sheets/variables.csv")).unwrap(), &body).unwrap();
    assert_eq!(parsed_ds.rows.len(), 10);
    assert_eq!(parsed_vs.len(), 4);

    let overlapping = "variable,typeEnd,typeStart,databaseStart,variableStart,recEnd,recStart\n\
        sex,categorical,categorical,paquid,paquid::male,NA::b,else\n\
        sex,categorical,categorical,paquid,paquid::male,NA::c,else\n";
    let (status, body) = call(
        &app,
        Method::PUT,
        &format!("/sessions/{id}/sheets/details"),
        Payload::Csv(overlapping.as_bytes().to_vec()),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let report = &json_of(&body)["report"];
    assert_eq!(report["ok"], false);
    assert!(report["errors"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f["severity"] == "error" && f["location"]["sheet"] == "details"));

    let broken = "variable,typeEnd,typeStart,databaseStart,variableStart,recEnd,recStart\n\
        sex,categorical,categorical,paquid,paquid::male,Male,\"[5,1]\"\n";
    let (status, body) = call(
        &app,
        Method::PUT,
        &format!("/sessions/{id}/sheets/details"),
        Payload::Csv(broken.as_bytes().to_vec()),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let v = json_of(&body);
    assert_eq!(v["code"], "SheetParse");
    assert_eq!(
        v["location"],
        json!({ "sheet": "details", "row": 1, "column": "recStart" })
    );

    // the failed PUT left the previous sheet in place
    let (_, body) = call(&app, Method::GET, &format!("/sessions/{id}/validation"), Payload::None).await;
    assert_eq!(json_of(&body)["ok"], false);
    let (_, body) = call(&app, Method::GET, &format!("/sessions/{id}"), Payload::None).await;
    assert_eq!(json_of(&body)["detailsRows"], 2);

    let (status, _) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/sheets/other"),
        Payload::None,
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn detail_rows_add_and_delete() {
    let app = app();
    let id = open_paquid(&app).await;
    let uri = format!("/sessions/{id}/details-rows");
    for row in rows_of("sheets/details.csv").into_iter().take(2) {
        let (status, body) = call(&app, Method::POST, &uri, Payload::Json(Value::Object(row))).await;
        assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&body));
    }
    let (status, body) = call(&app, Method::DELETE, &format!("{uri}/0"), Payload::None).await;
    assert_eq!(status, StatusCode::OK);
    let v = json_of(&body);
    assert_eq!((v["removed"].clone(), v["rows"].clone()), (Value::Null, json!(2)));

    let (status, body) = call(&app, Method::DELETE, &format!("{uri}/1"), Payload::None).await;
    assert_eq!(status, StatusCode::OK);
    let v = json_of(&body);
    assert_eq!(v["removed"]["recEnd"]["value"], "Female");
    assert_eq!(v["rows"], 1);

    let (status, body) = call(&app, Method::DELETE, &format!("{uri}/5"), Payload::None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json_of(&body)["code"], "RowNotFound");

    let (status, body) = call(
        &app,
        Method::POST,
        &uri,
        Payload::Json(json!({ "variable": "sex", "shoeSize": "9" })),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json_of(&body)["location"]["column"], "shoeSize");
}

#[tokio::test]
async fn sessions_are_isolated() {
    let app = app();
    let a = open_paquid(&app).await;
    let b = open_paquid(&app).await;
    assert_ne!(a, b);
    let row = rows_of("sheets/details.csv").remove(0);
    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/sessions/{a}/details-rows"),
        Payload::Json(Value::Object(row)),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let (_, body) = call(&app, Method::GET, &format!("/sessions/{b}"), Payload::None).await;
    assert_eq!(json_of(&body)["detailsRows"], 0);
    let (_, body) = call(&app, Method::GET, &format!("/sessions/{a}"), Payload::None).await;
    assert_eq!(json_of(&body)["detailsRows"], 1);

    let (status, _) = call(&app, Method::DELETE, &format!("/sessions/{a}"), Payload::None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = call(&app, Method::GET, &format!("/sessions/{a}"), Payload::None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, Method::GET, &format!("/sessions/{b}"), Payload::None).await;
    assert_eq!(status, StatusCode::OK);
}

/// Builds the demonstration sheets row by row, as the wizard does.
async fn scripted_session(app: &Router) -> String {
    let id = open_paquid(app).await;
    for row in rows_of("sheets/variables.csv") {
        let (status, body) = call(
            app,
            Method::POST,
            &format!("/sessions/{id}/variable-rows"),
            Payload::Json(Value::Object(row)),
        )
        .await;
        assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&body));
    }
    for row in rows_of("sheets/details.csv") {
        let (status, body) = call(
            app,
            Method::POST,
            &format!("/sessions/{id}/details-rows"),
            Payload::Json(Value::Object(row)),
        )
        .await;
        assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&body));
    }
    let (status, body) = call(
        app,
        Method::POST,
        &format!("/sessions/{id}/derived"),
        Payload::Json(mmse_cep_spec()),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&body));
    id
}

#[tokio::test]
async fn scripted_flow_matches_pipeline() {
    let app = app();
    let id = scripted_session(&app).await;
    let (_, body) = call(&app, Method::GET, &format!("/sessions/{id}/validation"), Payload::None).await;
    assert_eq!(json_of(&body)["ok"], true, "{}", String::from_utf8_lossy(&body));

    let selected = json!(["sex", "MMSE_category", "CEP_bin", "MMSE-CEP"]);
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/recode"),
        Payload::Json(json!({ "selected": selected, "passthrough": ["ID"], "outputFormat": "csv" })),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{}", String::from_utf8_lossy(&body));
    let job = json_of(&body)["jobId"].as_str().unwrap().to_string();
    let done = wait_for(&app, &job).await;
    assert_eq!(done["state"], "succeeded", "{done}");
    assert_eq!(done["stats"]["rowsOut"], 2250);
    assert_eq!(done["progress"]["rowsDone"], 2250);

    let (status, first) = call(&app, Method::GET, &format!("/jobs/{job}/result"), Payload::None).await;
    assert_eq!(status, StatusCode::OK);
    let (_, second) = call(&app, Method::GET, &format!("/jobs/{job}/result"), Payload::None).await;
    assert_eq!(first, second);

    // direct pipeline run over the shipped sheet files
    let dir = tempfile::tempdir().unwrap();
    let (vs, ds) = read_sheets(
        &std::fs::read(data("sheets/variables.csv")).unwrap(),
        &std::fs::read(data("sheets/details.csv")).unwrap(),
    )
    .unwrap();
    let out = dir.path().join("direct.csv");
    let direct = RecodeJob {
        source: SourceSpec::csv(data("paquid.csv")),
        variables: vs,
        details: ds,
        variables_path: None,
        details_path: None,
        database: "paquid".into(),
        selected: serde_json::from_value(selected).unwrap(),
        passthrough: vec!["ID".into()],
        derived_specs: vec![serde_json::from_value(mmse_cep_spec()).unwrap()],
        dvl: None,
        derive: Vec::new(),
        output: OutputSpec {
            format: harmonize_core::io::Format::Csv,
            path: out.clone(),
            table: None,
        },
        options: Default::default(),
    };
    run_recode(&direct, &mut |_| {}).unwrap();
    assert_eq!(&first[..], &std::fs::read(&out).unwrap()[..]);

    let (status, body) = call(&app, Method::GET, &format!("/jobs/{job}/manifest"), Payload::None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json_of(&body)["derived"][0]["name"], "MMSE-CEP");

    let (status, body) = call(&app, Method::GET, &format!("/sessions/{id}/derived-doc"), Payload::None).await;
    assert_eq!(status, StatusCode::OK);
    let doc = String::from_utf8(body.to_vec()).unwrap();
    assert!(doc.contains("MMSE-CEP") && doc.contains("MMSECEPfunction"), "{doc}");

    let persisted = tempfile::tempdir().unwrap();
    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/persist"),
        Payload::Json(json!({ "dir": persisted.path() })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (pvs, pds) = read_sheets(
        &std::fs::read(persisted.path().join("variables.csv")).unwrap(),
        &std::fs::read(persisted.path().join("details.csv")).unwrap(),
    )
    .unwrap();
    assert_eq!((pvs.len(), pds.rows.len()), (4, 10));
}

#[tokio::test]
async fn sqlite_output_download() {
    let app = app();
    let id = scripted_session(&app).await;
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/recode"),
        Payload::Json(json!({ "selected": ["sex"], "outputFormat": "sqlite", "table": "out" })),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let job = json_of(&body)["jobId"].as_str().unwrap().to_string();
    assert_eq!(wait_for(&app, &job).await["state"], "succeeded");
    let (status, bytes) = call(&app, Method::GET, &format!("/jobs/{job}/result"), Payload::None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(bytes.starts_with(b"SQLite format 3\0"));
}

#[tokio::test]
async fn bad_plans_rejected_before_queueing() {
    let app = app();
    let id = scripted_session(&app).await;
    let uri = format!("/sessions/{id}/recode");
    let (status, body) = call(
        &app,
        Method::POST,
        &uri,
        Payload::Json(json!({ "selected": ["weight"] })),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json_of(&body)["code"], "Plan");

    let (status, body) = call(
        &app,
        Method::POST,
        &uri,
        Payload::Json(json!({ "selected": ["sex"], "dvlNames": ["ghost"] })),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json_of(&body)["code"], "UnknownDerived");

    let (status, _) = call(
        &app,
        Method::POST,
        &uri,
        Payload::Json(json!({ "selected": ["sex"], "dvlNames": ["x@y"] })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body) = call(&app, Method::GET, "/jobs/nope/result", Payload::None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json_of(&body)["code"], "UnknownJob");
}

#[tokio::test]
async fn strict_failure_reported_on_job() {
    let app = app();
    let id = open_paquid(&app).await;
    let vars = "variable,variableType,databaseStart,variableStart\nage5,categorical,paquid,paquid::age\n";
    let details = "variable,typeEnd,typeStart,databaseStart,variableStart,recEnd,recStart\n\
        age5,categorical,continuous,paquid,paquid::age,old,\"[90,120]\"\n";
    call(
        &app,
        Method::PUT,
        &format!("/sessions/{id}/sheets/variables"),
        Payload::Csv(vars.into()),
    )
    .await;
    call(
        &app,
        Method::PUT,
        &format!("/sessions/{id}/sheets/details"),
        Payload::Csv(details.into()),
    )
    .await;
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/recode"),
        Payload::Json(json!({ "selected": ["age5"], "strictUnmatched": true })),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let job = json_of(&body)["jobId"].as_str().unwrap().to_string();
    let done = wait_for(&app, &job).await;
    assert_eq!(done["state"], "failed");
    assert_eq!(done["error"]["code"], "Validation");
    let (status, body) = call(&app, Method::GET, &format!("/jobs/{job}/result"), Payload::None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(json_of(&body)["code"], "JobFailed");
}

#[tokio::test]
async fn library_endpoints() {
    let app = app();
    let spec = mmse_cep_spec();
    let (status, body) = call(
        &app,
        Method::POST,
        "/dvl",
        Payload::Json(json!({ "spec": spec, "author": "tester" })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let first = json_of(&body);
    assert_eq!(
        (first["version"].clone(), first["duplicate"].clone()),
        (json!(1), json!(false))
    );

    let (status, body) = call(&app, Method::POST, "/dvl", Payload::Json(json!({ "spec": spec }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json_of(&body)["duplicate"], true);

    let mut changed = spec.clone();
    changed["functionBody"] = json!("CEP_bin ++ \"/\" ++ MMSE_category");
    let (status, body) = call(&app, Method::POST, "/dvl", Payload::Json(json!({ "spec": changed }))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(json_of(&body)["version"], 2);

    let (_, body) = call(&app, Method::GET, "/dvl", Payload::None).await;
    let list = json_of(&body);
    assert_eq!(list[0]["name"], "MMSE-CEP");
    assert_eq!(list[0]["versions"], 2);

    let (status, body) = call(&app, Method::GET, "/dvl/MMSE-CEP?version=1", Payload::None).await;
    assert_eq!(status, StatusCode::OK);
    let v1 = json_of(&body);
    assert_eq!(v1["author"], "tester");
    assert_eq!(v1["contentHash"], first["contentHash"]);
    let (_, body) = call(&app, Method::GET, "/dvl/MMSE-CEP", Payload::None).await;
    assert_eq!(json_of(&body)["versions"].as_array().unwrap().len(), 2);
    let (status, _) = call(&app, Method::GET, "/dvl/MMSE-CEP?version=3", Payload::None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, Method::GET, "/dvl/none", Payload::None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let mut broken = spec.clone();
    broken["functionBody"] = json!("MMSE_category ++");
    let (status, body) = call(&app, Method::POST, "/dvl", Payload::Json(json!({ "spec": broken }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let v = json_of(&body);
    assert_eq!(v["code"], "Syntax");
    assert!(v["location"]["offset"].is_number());

    let (status, body) = call(&app, Method::GET, "/dvl-doc", Payload::None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(String::from_utf8_lossy(&body).contains("MMSECEPfunction"));
}

#[tokio::test]
async fn recode_with_library_entry() {
    let dvl = tempfile::tempdir().unwrap();
    let (app, _) = app_with(ServiceConfig {
        dvl_dir: Some(dvl.path().to_path_buf()),
        ..ServiceConfig::default()
    });
    let (status, _) = call(
        &app,
        Method::POST,
        "/dvl",
        Payload::Json(json!({ "spec": mmse_cep_spec() })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert!(dvl.path().join("catalog.csv").exists());

    let id = open_paquid(&app).await;
    for (sheet, file) in [("variables", "sheets/variables.csv"), ("details", "sheets/details.csv")] {
        let bytes = std::fs::read(data(file)).unwrap();
        let (status, _) = call(
            &app,
            Method::PUT,
            &format!("/sessions/{id}/sheets/{sheet}"),
            Payload::Csv(bytes),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
    }
    // the derived expression comes from the library, not the session
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/recode"),
        Payload::Json(json!({ "selected": ["MMSE_category", "CEP_bin", "MMSE-CEP"] })),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{}", String::from_utf8_lossy(&body));
    let job = json_of(&body)["jobId"].as_str().unwrap().to_string();
    let done = wait_for(&app, &job).await;
    assert_eq!(done["state"], "succeeded", "{done}");
    let (_, body) = call(&app, Method::GET, &format!("/jobs/{job}/manifest"), Payload::None).await;
    let m = json_of(&body);
    assert_eq!(m["derived"][0]["author"], "api");
    assert_eq!(m["dvl"]["kind"], "dir");
}

#[tokio::test]
async fn expression_feedback() {
    let app = app();
    let parse = |body: Value| {
        let app = app.clone();
        async move {
            let (status, bytes) = call(&app, Method::POST, "/expr/parse", Payload::Json(body)).await;
            assert_eq!(status, StatusCode::OK);
            json_of(&bytes)
        }
    };
    let ok = parse(json!({ "source": "if a > 1 then \"hi\" else b" })).await;
    assert_eq!(ok["ok"], true);
    assert_eq!(ok["identifiers"], json!(["a", "b"]));

    let typed = parse(json!({ "source": "a * 2", "components": { "a": "continuous" } })).await;
    assert_eq!(typed["outputType"], "continuous");

    let bad_type = parse(json!({ "source": "a * 2", "components": { "a": "categorical" } })).await;
    assert_eq!(bad_type["ok"], false);
    assert_eq!(bad_type["error"]["kind"], "type");

    let syntax = parse(json!({ "source": "1 + (2" })).await;
    assert_eq!(syntax["ok"], false);
    assert_eq!(syntax["error"]["kind"], "syntax");
    assert!(syntax["error"]["position"].as_u64().unwrap() <= 6);
}

#[tokio::test]
async fn idle_sessions_expire() {
    let (app, state) = app_with(ServiceConfig {
        session_ttl: Duration::from_millis(50),
        ..ServiceConfig::default()
    });
    let id = open_paquid(&app).await;
    assert_eq!(state.sweep_expired(), 0);
    tokio::time::sleep(Duration::from_millis(120)).await;
    assert_eq!(state.sweep_expired(), 1);
    assert_eq!(state.session_count(), 0);
    let (status, _) = call(&app, Method::GET, &format!("/sessions/{id}"), Payload::None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
