//! HTTP API exercised over a real socket with a scripted model backend.

use std::path::Path;
use std::sync::Arc;

use reqwest::blocking::Client;
use serde_json::{json, Value};

use sketchedit::cli::app_state;
use sketchedit::config::StoreConfig;
use sketchedit_core::captioning::{assemble_dataset, Dataset, EditTriplet, FilterConfig, Instruction, ModalitySource};
use sketchedit_core::pipeline::{build_infilling_prompt, build_locating_prompt, ScriptedBackend};

const CUBE: &str = "sketch face loop line 192 64 line 192 192 line 64 192 line 64 64 \
extrude theta 0 phi 128 gamma 128 origin 128 128 128 scale 128 dist 192 128 op new ext one <eom>";
const HOLE: &str = " sketch face loop circle 128 128 24 \
extrude theta 0 phi 128 gamma 128 origin 128 128 128 scale 128 dist 224 128 op cut ext sym <eom>";

fn holed() -> String {
    CUBE.replace(" <eom>", HOLE)
}

fn write_script(path: &Path) {
    let t = EditTriplet::new(
        Instruction::plain("Remove the cylinder.", ModalitySource::Template),
        holed(),
        CUBE.to_string(),
        None,
    );
    let ds = assemble_dataset(vec![t], &FilterConfig::default()).unwrap();
    std::fs::write(path, ds.to_jsonl()).unwrap();
}

/// The file's triplets plus "Break it." on the cube, answered with a truncated sequence.
fn backend(script: &Path) -> ScriptedBackend {
    let ds = Dataset::from_jsonl(&std::fs::read_to_string(script).unwrap()).unwrap();
    let mut b = ScriptedBackend::from_triplets(&ds.triplets);
    let masked = CUBE.replace("dist 192 128", "dist <mask>");
    b.insert(build_locating_prompt(CUBE, "Break it.").unwrap(), vec![masked.clone()]);
    b.insert(build_infilling_prompt(CUBE, "Break it.", &masked).unwrap(), vec!["sketch face".into()]);
    b
}

struct Server {
    base: String,
    client: Client,
    dir: tempfile::TempDir,
}

impl Server {
    fn start() -> Server {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("script.jsonl");
        write_script(&script);
        let mut cfg = StoreConfig { data_dir: dir.path().join("data"), ..StoreConfig::default() };
        cfg.model.script = Some(script.clone());
        let mut state = app_state(&cfg).unwrap();
        state.model = Arc::new(backend(&script));
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || rt.block_on(sketchedit::api::serve_on(listener, state)));
        Server { base: format!("http://{addr}"), client: Client::new(), dir }
    }

    fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self.client.post(format!("{}{path}", self.base)).json(&body).send().unwrap();
        (r.status().as_u16(), r.json().unwrap())
    }

    fn get(&self, path: &str) -> reqwest::blocking::Response {
        self.client.get(format!("{}{path}", self.base)).send().unwrap()
    }

    fn selective_lines(&self) -> usize {
        std::fs::read_to_string(self.dir.path().join("data/selective.jsonl")).map_or(0, |t| t.lines().count())
    }
}

#[test]
fn session_lifecycle() {
    let srv = Server::start();
    let (status, s) = srv.post("/sessions", json!({ "model": holed() }));
    assert_eq!(status, 201);
    let id = s["id"].as_str().unwrap().to_string();
    assert_eq!(s["history"].as_array().unwrap().len(), 0);

    let (status, other) = srv.post("/sessions", json!({ "model": holed() }));
    assert_eq!(status, 201);
    assert_ne!(other["id"], s["id"]);

    let (status, r) =
        srv.post(&format!("/sessions/{id}/instructions"), json!({ "instruction": "Remove the cylinder." }));
    assert_eq!(status, 200, "{r}");
    let candidates = r["result"]["candidates"].as_array().unwrap();
    assert_eq!(candidates.len(), 5);
    assert!(candidates.iter().all(|c| c["parse_ok"] == true && c["consistency_ok"] == true));
    assert_eq!(r["session"]["history"].as_array().unwrap().len(), 1);

    let mesh = srv.get(&format!("/sessions/{id}/candidates/2/mesh"));
    assert_eq!(mesh.status().as_u16(), 200);
    assert_eq!(mesh.headers()["content-type"], "model/obj");
    let obj = mesh.text().unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 8);
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 12);

    let png = srv.get(&format!("/sessions/{id}/candidates/0/preview"));
    assert_eq!(png.status().as_u16(), 200);
    assert_eq!(&png.bytes().unwrap()[..8], b"\x89PNG\r\n\x1a\n");

    assert_eq!(srv.selective_lines(), 0);
    let (status, s2) = srv.post(&format!("/sessions/{id}/selection"), json!({ "index": 2, "annotator": "alice" }));
    assert_eq!(status, 200, "{s2}");
    assert_eq!(s2["current"], CUBE);
    assert_eq!(srv.selective_lines(), 1);
    let (_, s3) = srv.post(&format!("/sessions/{id}/selection"), json!({ "index": 2, "annotator": "alice" }));
    assert_eq!(srv.selective_lines(), 1);

    let fetched: Value = srv.get(&format!("/sessions/{id}")).json().unwrap();
    assert_eq!(fetched, s3);
}

#[test]
fn invalid_candidates_and_errors() {
    let srv = Server::start();
    let (_, s) = srv.post("/sessions", json!({ "model": CUBE }));
    let id = s["id"].as_str().unwrap();
    let (status, r) = srv.post(&format!("/sessions/{id}/instructions"), json!({ "instruction": "Break it.", "k": 3 }));
    assert_eq!(status, 200);
    let candidates = r["result"]["candidates"].as_array().unwrap();
    assert_eq!(candidates.len(), 3);
    assert!(candidates.iter().all(|c| c["parse_ok"] == false));

    let (status, e) = srv.post(&format!("/sessions/{id}/selection"), json!({ "index": 0, "annotator": "a" }));
    assert_eq!(status, 422);
    assert_eq!(e["error"], "InvalidCandidate");
    assert_eq!(srv.get(&format!("/sessions/{id}/candidates/0/mesh")).status().as_u16(), 422);

    let (status, e) = srv.post("/sessions", json!({ "model": "sketch face loop" }));
    assert_eq!(status, 422);
    assert_eq!(e["error"], "InvalidModel");
    assert!(e["details"]["parse"]["kind"].is_string());

    let missing = srv.get("/sessions/00000000-0000-0000-0000-000000000000");
    assert_eq!(missing.status().as_u16(), 404);
    assert_eq!(missing.json::<Value>().unwrap()["error"], "UnknownSession");
    let (status, e) = srv.post("/sessions/nope/instructions", json!({ "instruction": "x" }));
    assert_eq!((status, e["error"].as_str()), (404, Some("UnknownSession")));

    let (status, e) = srv.post(&format!("/sessions/{id}/instructions"), json!({ "instruction": "Unscripted." }));
    assert_eq!(status, 503);
    assert_eq!(e["error"], "BackendUnavailable");
    let after: Value = srv.get(&format!("/sessions/{id}")).json().unwrap();
    assert_eq!(after["history"].as_array().unwrap().len(), 1);

    let (status, e) = srv.post("/sessions", json!({ "wrong": 1 }));
    assert_eq!((status, e["error"].as_str()), (400, Some("BadRequest")));
}

#[test]
fn eval_endpoint() {
    let srv = Server::start();
    let testset = std::fs::read_to_string(srv.dir.path().join("script.jsonl")).unwrap();
    let first = testset.lines().next().unwrap();
    let t: Value = serde_json::from_str(first).unwrap();
    let candidate = json!({ "edit_text": t["edit"], "parse_ok": true, "consistency_ok": true });
    let line = json!({ "orig": t["orig"], "instruction": t["instruction"], "masked": t["mask"], "candidates": [candidate], "k": 1 });
    let (status, r) = srv.post("/eval", json!({ "testset": first, "results": line.to_string() }));
    assert_eq!(status, 200, "{r}");
    assert_eq!(r["report"]["vr"], 1.0);
    assert_eq!(r["report"]["cd"], 0.0);
    assert!(r["table"].as_str().unwrap().starts_with("      VR"));

    let (status, e) = srv.post("/eval", json!({ "testset": first, "results": "" }));
    assert_eq!((status, e["error"].as_str()), (422, Some("InvalidInput")));
}
