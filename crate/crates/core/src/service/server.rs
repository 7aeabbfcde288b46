//! Localhost TCP host for annotation sessions.
//!
//! Requests (`kind: "request"`):
//!
//! | method | path | payload |
//! |---|---|---|
//! | `POST` | `session` | `{user, seed?}` |
//! | `GET` | `session/{id}` | – |
//! | `POST` | `session/{id}/command` | a command object, e.g. `{"type": "undo"}` |
//! | `GET` | `session/{id}/frame?camera=scene\|original&revision=N&mask=1` | – |
//! | `GET` | `session/{id}/history` | – |
//! | `GET` | `session/{id}/log` | – |
//! | `SUBSCRIBE` | `session/{id}` | – |
//!
//! After a `SUBSCRIBE` response the connection only carries `revision`
//! events, one per accepted command, in revision order.

use std::collections::HashMap;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::JoinHandle;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};

use super::protocol::{read_message, write_message, Envelope, MessageKind};
use super::session::{render_snapshot, start_session, AnnotationRecordView, Command, Session, SessionConfig};
use super::ServiceError;
use crate::render::RenderOptions;
use crate::scene::CameraSelect;

pub const DEFAULT_PORT: u16 = 7646;
pub const PORT_ENV: &str = "POSEFORGE_PORT";

/// `POSEFORGE_PORT` if set and valid, else [`DEFAULT_PORT`].
pub fn default_port() -> u16 {
    std::env::var(PORT_ENV).ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_PORT)
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub dataset: PathBuf,
    /// Directory for per-session JSON-lines annotation logs.
    pub log_dir: Option<PathBuf>,
    pub render: RenderOptions,
}

struct Slot {
    session: Mutex<Session>,
    subscribers: Mutex<Vec<mpsc::Sender<Envelope>>>,
}

struct State {
    config: ServerConfig,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
    next_session: AtomicU64,
    shutdown: AtomicBool,
}

pub struct Server {
    listener: TcpListener,
    state: Arc<State>,
}

pub struct ServerHandle {
    addr: SocketAddr,
    state: Arc<State>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.state.shutdown.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

impl Server {
    /// Binds `127.0.0.1:port`; port 0 picks a free one.
    pub fn bind(port: u16, config: ServerConfig) -> Result<Self, ServiceError> {
        let listener = TcpListener::bind(("127.0.0.1", port))?;
        Ok(Server {
            listener,
            state: Arc::new(State {
                config,
                sessions: Mutex::new(HashMap::new()),
                next_session: AtomicU64::new(1),
                shutdown: AtomicBool::new(false),
            }),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, ServiceError> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts connections until shut down, one thread per connection.
    pub fn serve(self) {
        for stream in self.listener.incoming() {
            if self.state.shutdown.load(Ordering::SeqCst) {
                break;
            }
            match stream {
                Ok(s) => {
                    let state = Arc::clone(&self.state);
                    std::thread::spawn(move || {
                        if let Err(e) = handle_connection(s, &state) {
                            log::debug!("connection closed: {e}");
                        }
                    });
                }
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
    }

    pub fn spawn(self) -> Result<ServerHandle, ServiceError> {
        let addr = self.local_addr()?;
        let state = Arc::clone(&self.state);
        let thread = std::thread::spawn(move || self.serve());
        Ok(ServerHandle { addr, state, thread: Some(thread) })
    }
}

fn handle_connection(mut stream: TcpStream, state: &State) -> Result<(), ServiceError> {
    stream.set_nodelay(true)?;
    while let Some(req) = read_message(&mut stream)? {
        if state.shutdown.load(Ordering::SeqCst) {
            return Ok(());
        }
        if req.kind != MessageKind::Request {
            let err = ServiceError::Protocol(format!("expected a request, got {:?}", req.kind));
            write_message(&mut stream, &error_response(&req, &err))?;
            continue;
        }
        if req.method == "SUBSCRIBE" {
            let (slot, sid) = match lookup_subscription(state, &req.path) {
                Ok(v) => v,
                Err(e) => {
                    write_message(&mut stream, &error_response(&req, &e))?;
                    continue;
                }
            };
            let (tx, rx) = mpsc::channel();
            let revision = {
                // Registering under the session lock orders the ack before
                // any event for a later revision.
                let s = slot.session.lock().expect("session lock");
                slot.subscribers.lock().expect("subscriber lock").push(tx);
                s.revision()
            };
            let ack = response(&req, Some(revision), json!({ "session": sid }));
            write_message(&mut stream, &ack)?;
            for event in rx {
                write_message(&mut stream, &event)?;
            }
            return Ok(());
        }
        let resp = match route(state, &req) {
            Ok((revision, payload)) => response(&req, revision, payload),
            Err(e) => error_response(&req, &e),
        };
        write_message(&mut stream, &resp)?;
    }
    Ok(())
}

fn response(req: &Envelope, revision: Option<u64>, payload: Value) -> Envelope {
    Envelope {
        id: req.id,
        revision,
        kind: MessageKind::Response,
        method: "ok".into(),
        path: req.path.clone(),
        payload,
    }
}

fn error_response(req: &Envelope, e: &ServiceError) -> Envelope {
    Envelope {
        id: req.id,
        revision: None,
        kind: MessageKind::Response,
        method: "error".into(),
        path: req.path.clone(),
        payload: json!({ "code": e.code(), "message": e.to_string() }),
    }
}

fn lookup(state: &State, id: &str) -> Result<Arc<Slot>, ServiceError> {
    state
        .sessions
        .lock()
        .expect("sessions lock")
        .get(id)
        .cloned()
        .ok_or_else(|| ServiceError::UnknownSession(id.to_owned()))
}

fn lookup_subscription(state: &State, path: &str) -> Result<(Arc<Slot>, String), ServiceError> {
    match path.trim_matches('/').split('/').collect::<Vec<_>>().as_slice() {
        ["session", id] => Ok((lookup(state, id)?, (*id).to_owned())),
        _ => Err(ServiceError::Protocol(format!("cannot subscribe to {path:?}"))),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Value, ServiceError> {
    serde_json::to_value(v).map_err(|e| ServiceError::Protocol(e.to_string()))
}

fn from_json<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T, ServiceError> {
    T::deserialize(v).map_err(|e| ServiceError::InvalidCommand(e.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewSession {
    user: String,
    #[serde(default)]
    seed: u64,
}

fn route(state: &State, req: &Envelope) -> Result<(Option<u64>, Value), ServiceError> {
    let (path, query) = req.path.split_once('?').unwrap_or((&req.path, ""));
    let segments: Vec<&str> = path.trim_matches('/').split('/').collect();
    match (req.method.as_str(), segments.as_slice()) {
        ("POST", ["session"]) => {
            let NewSession { user, seed } = from_json(&req.payload)?;
            if user.is_empty() || !user.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(ServiceError::InvalidCommand(format!("bad user id {user:?}")));
            }
            let id = format!("s{}", state.next_session.fetch_add(1, Ordering::SeqCst));
            let log_path = match &state.config.log_dir {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    Some(dir.join(format!("{user}-{id}.jsonl")))
                }
                None => None,
            };
            let config = SessionConfig { log_path, render: state.config.render, ..Default::default() };
            let session = start_session(&id, &state.config.dataset, &user, seed, config)?;
            let body = session_summary(&session)?;
            let revision = session.revision();
            state.sessions.lock().expect("sessions lock").insert(
                id,
                Arc::new(Slot { session: Mutex::new(session), subscribers: Mutex::new(Vec::new()) }),
            );
            Ok((Some(revision), body))
        }
        ("GET", ["session", id]) => {
            let slot = lookup(state, id)?;
            let s = slot.session.lock().expect("session lock");
            Ok((Some(s.revision()), session_summary(&s)?))
        }
        ("POST", ["session", id, "command"]) => {
            let slot = lookup(state, id)?;
            let cmd: Command = from_json(&req.payload)?;
            let mut s = slot.session.lock().expect("session lock");
            let delta = s.apply(cmd)?;
            let body = to_json(&delta)?;
            let event = Envelope {
                id: 0,
                revision: Some(delta.revision),
                kind: MessageKind::Event,
                method: "revision".into(),
                path: format!("session/{id}"),
                payload: body.clone(),
            };
            slot.subscribers.lock().expect("subscriber lock").retain(|tx| tx.send(event.clone()).is_ok());
            Ok((Some(delta.revision), body))
        }
        ("GET", ["session", id, "frame"]) => {
            let slot = lookup(state, id)?;
            let mut camera = CameraSelect::Original;
            let mut revision = None;
            let mut with_mask = false;
            for pair in query.split('&').filter(|p| !p.is_empty()) {
                let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
                match k {
                    "camera" => camera = v.parse().map_err(ServiceError::InvalidCommand)?,
                    "revision" if !v.is_empty() => {
                        revision = Some(v.parse().map_err(|_| ServiceError::InvalidCommand(format!("bad revision {v:?}")))?)
                    }
                    "revision" => {}
                    "mask" => with_mask = matches!(v, "1" | "true"),
                    other => return Err(ServiceError::InvalidCommand(format!("unknown query key {other:?}"))),
                }
            }
            // Render outside the session lock so commands are not blocked.
            let (rev, scene) = slot.session.lock().expect("session lock").scene_at(revision)?;
            let frame = render_snapshot(&scene, camera, &state.config.render)?;
            let png = frame.image.to_png().map_err(|e| ServiceError::Render(e.into()))?;
            let mut body = json!({
                "revision": rev,
                "camera": camera,
                "width": frame.image.width(),
                "height": frame.image.height(),
                "png_base64": BASE64.encode(png),
                "objects": frame.object_ids,
            });
            if with_mask {
                let mask = frame.mask.to_png().map_err(|e| ServiceError::Render(e.into()))?;
                body["mask_png_base64"] = Value::String(BASE64.encode(mask));
            }
            Ok((Some(rev), body))
        }
        ("GET", ["session", id, "history"]) => {
            let slot = lookup(state, id)?;
            let s = slot.session.lock().expect("session lock");
            Ok((Some(s.revision()), to_json(&s.history())?))
        }
        ("GET", ["session", id, "log"]) => {
            let slot = lookup(state, id)?;
            let s = slot.session.lock().expect("session lock");
            let views: Vec<AnnotationRecordView> = s.records().iter().map(AnnotationRecordView::from).collect();
            Ok((Some(s.revision()), to_json(&views)?))
        }
        (m, _) => Err(ServiceError::Protocol(format!("no route for {m} {}", req.path))),
    }
}

fn session_summary(s: &Session) -> Result<Value, ServiceError> {
    let objects: Vec<Value> = s
        .scene()
        .objects()
        .iter()
        .map(|o| json!({ "id": o.id, "pose": o.pose, "color": o.color, "visible": o.visible }))
        .collect();
    Ok(json!({
        "session": s.id(),
        "user": s.user(),
        "revision": s.revision(),
        "plan": to_json(s.plan())?,
        "cursor": s.cursor(),
        "sample": s.sample(),
        "active": s.active(),
        "intrinsics": s.scene().intrinsics(),
        "objects": objects,
        "complete": s.is_complete(),
    }))
}
