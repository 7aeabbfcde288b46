mod common;

use std::time::Duration;

use base64::{engine::general_purpose::STANDARD as BASE64, Engine};
use serde_json::{json, Value};

use common::cube;
use poseforge::geometry::{CameraIntrinsics, RigidTransform, Vec3};
use poseforge::imaging::RgbImage;
use poseforge::io::{import_pose, write_sample};
use poseforge::service::{Client, MessageKind, Server, ServerConfig, ServiceError};
use poseforge::study::read_log_file;

fn dataset(n: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let k = CameraIntrinsics::new(100.0, 100.0, 32.0, 24.0, 64, 48).unwrap();
    let img = RgbImage::new(64, 48, [30, 60, 90]);
    for i in 0..n {
        let gt = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 300.0 + i as f64));
        write_sample(dir.path(), &format!("S{i:02}"), &img, &k, &[(&cube("box", 20.0), Some(gt))]).unwrap();
    }
    dir
}

fn serve(data: &tempfile::TempDir) -> (poseforge::service::ServerHandle, std::path::PathBuf) {
    let logs = data.path().join("logs");
    let cfg = ServerConfig { dataset: data.path().to_owned(), log_dir: Some(logs.clone()), render: Default::default() };
    (Server::bind(0, cfg).unwrap().spawn().unwrap(), logs)
}

fn command(c: &mut Client, sid: &str, cmd: Value) -> Result<poseforge::service::Envelope, ServiceError> {
    c.request("POST", &format!("session/{sid}/command"), cmd)
}

#[test]
fn annotation_session_over_tcp() {
    let data = dataset(3);
    let (server, logs) = serve(&data);
    let mut c = Client::connect(server.addr()).unwrap();

    let created = c.request("POST", "session", json!({ "user": "ana", "seed": 5 })).unwrap();
    let sid = created.payload["session"].as_str().unwrap().to_owned();
    assert_eq!(created.revision, Some(0));
    assert_eq!(created.payload["plan"]["entries"].as_array().unwrap().len(), 9);

    let mut sub = Client::connect(server.addr()).unwrap();
    sub.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    let ack = sub.request("SUBSCRIBE", &format!("session/{sid}"), Value::Null).unwrap();
    assert_eq!(ack.revision, Some(0));

    let placed = "1 0 0 0\n0 1 0 0\n0 0 1 300\n0 0 0 1\n";
    let mut revisions = vec![];
    for cmd in [
        json!({ "type": "set_pose_text", "text": placed }),
        json!({ "type": "gesture_translate", "start": { "u": 10, "v": 10 }, "end": { "u": 20, "v": 15 } }),
        json!({ "type": "gesture_rotate", "start": { "u": 32, "v": 24 }, "end": { "u": 40, "v": 24 }, "camera": "scene" }),
        json!({ "type": "gesture_depth", "notches": -2 }),
        json!({ "type": "undo" }),
    ] {
        revisions.push(command(&mut c, &sid, cmd).unwrap().revision.unwrap());
    }
    assert_eq!(revisions, vec![1, 2, 3, 4, 5]);

    // Failed commands leave the revision alone.
    let bad = command(&mut c, &sid, json!({ "type": "select_object", "object": "nope" }));
    assert!(matches!(bad, Err(ServiceError::Remote { ref code, .. }) if code == "unknown_object"));
    let bad = command(&mut c, &sid, json!({ "type": "warp" }));
    assert!(matches!(bad, Err(ServiceError::Remote { ref code, .. }) if code == "invalid_command"));

    for expected in 1..=5 {
        let ev = sub.next_event().unwrap().unwrap();
        assert_eq!(ev.kind, MessageKind::Event);
        assert_eq!(ev.revision, Some(expected), "events arrive in order without gaps");
    }

    let exported = command(&mut c, &sid, json!({ "type": "export_pose" })).unwrap();
    assert_eq!(exported.revision, Some(5));
    let pose = import_pose(exported.payload["export_text"].as_str().unwrap()).unwrap();
    assert!((pose.translation.z - 300.0).abs() < 1e-6 && pose.translation.x > 0.0, "undo reverted only the depth step");

    let frame = c.request("GET", &format!("session/{sid}/frame?camera=original&mask=1"), Value::Null).unwrap();
    assert_eq!(frame.revision, Some(5));
    let png = BASE64.decode(frame.payload["png_base64"].as_str().unwrap()).unwrap();
    let img = RgbImage::decode_png(std::io::Cursor::new(&png)).unwrap();
    assert_eq!((img.width(), img.height()), (64, 48));
    assert!(frame.payload["mask_png_base64"].is_string());

    let old = c.request("GET", &format!("session/{sid}/frame?revision=1"), Value::Null).unwrap();
    assert_eq!(old.revision, Some(1));

    let done = command(&mut c, &sid, json!({ "type": "confirm_annotation" })).unwrap();
    assert_eq!(done.revision, Some(6));
    assert_eq!(done.payload["cursor"], 1);

    let history = c.request("GET", &format!("session/{sid}/history"), Value::Null).unwrap();
    let revs: Vec<u64> = history.payload.as_array().unwrap().iter().map(|h| h["revision"].as_u64().unwrap()).collect();
    assert!(revs.windows(2).all(|w| w[0] < w[1]));

    let log = c.request("GET", &format!("session/{sid}/log"), Value::Null).unwrap();
    assert_eq!(log.payload.as_array().unwrap().len(), 1);
    let on_disk = read_log_file(&logs.join(format!("ana-{sid}.jsonl"))).unwrap();
    assert_eq!(on_disk.len(), 1);
    assert_eq!(on_disk[0].user, "ana");
    assert!(on_disk[0].pose.max_abs_diff(&pose) < 1e-7);

    let missing = c.request("GET", "session/zzz", Value::Null);
    assert!(matches!(missing, Err(ServiceError::Remote { ref code, .. }) if code == "unknown_session"));
    server.shutdown();
}

#[test]
fn sessions_are_independent() {
    let data = dataset(2);
    let (server, _) = serve(&data);
    let mut a = Client::connect(server.addr()).unwrap();
    let mut b = Client::connect(server.addr()).unwrap();
    let sa = a.request("POST", "session", json!({ "user": "a" })).unwrap().payload["session"].as_str().unwrap().to_owned();
    let sb = b.request("POST", "session", json!({ "user": "b" })).unwrap().payload["session"].as_str().unwrap().to_owned();
    assert_ne!(sa, sb);
    command(&mut a, &sa, json!({ "type": "gesture_depth", "notches": 3 })).unwrap_err();
    command(&mut a, &sa, json!({ "type": "set_pose_text", "text": "1 0 0 0\n0 1 0 0\n0 0 1 250\n0 0 0 1" })).unwrap();
    assert_eq!(b.request("GET", &format!("session/{sb}"), Value::Null).unwrap().revision, Some(0));
    assert_eq!(a.request("GET", &format!("session/{sa}"), Value::Null).unwrap().revision, Some(1));
}

#[test]
fn bad_user_ids_are_rejected() {
    let data = dataset(1);
    let (server, _) = serve(&data);
    let mut c = Client::connect(server.addr()).unwrap();
    let r = c.request("POST", "session", json!({ "user": "../etc" }));
    assert!(matches!(r, Err(ServiceError::Remote { ref code, .. }) if code == "invalid_command"));
}
