//! Wire format: each message is a 4-byte big-endian length followed by that
//! many bytes of UTF-8 JSON encoding an [`Envelope`].

use std::io::{ErrorKind, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ServiceError;

pub const MAX_MESSAGE_BYTES: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Request,
    Response,
    Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    /// Echoed from request to response.
    #[serde(default)]
    pub id: u64,
    #[serde(default)]
    pub revision: Option<u64>,
    pub kind: MessageKind,
    /// `GET`, `POST` or `SUBSCRIBE` on requests; `ok`/`error` on responses;
    /// the event name on events.
    pub method: String,
    pub path: String,
    #[serde(default)]
    pub payload: Value,
}

impl Envelope {
    pub fn request(id: u64, method: &str, path: &str, payload: Value) -> Self {
        Envelope { id, revision: None, kind: MessageKind::Request, method: method.into(), path: path.into(), payload }
    }
}

pub fn write_message<W: Write>(w: &mut W, msg: &Envelope) -> Result<(), ServiceError> {
    let body = serde_json::to_vec(msg).map_err(|e| ServiceError::Protocol(e.to_string()))?;
    if body.len() > MAX_MESSAGE_BYTES {
        return Err(ServiceError::Protocol(format!("message of {} bytes exceeds the limit", body.len())));
    }
    w.write_all(&(body.len() as u32).to_be_bytes())?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

/// `Ok(None)` on a clean end of stream before a length prefix.
pub fn read_message<R: Read>(r: &mut R) -> Result<Option<Envelope>, ServiceError> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let n = u32::from_be_bytes(len) as usize;
    if n > MAX_MESSAGE_BYTES {
        return Err(ServiceError::Protocol(format!("message of {n} bytes exceeds the limit")));
    }
    let mut body = vec![0u8; n];
    r.read_exact(&mut body)?;
    serde_json::from_slice(&body).map(Some).map_err(|e| ServiceError::Protocol(e.to_string()))
}

/// Blocking client for one connection.
pub struct Client {
    stream: TcpStream,
    next_id: u64,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, ServiceError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Client { stream, next_id: 1 })
    }

    /// Sends a request and waits for its response. Error responses become
    /// [`ServiceError::Remote`].
    pub fn request(&mut self, method: &str, path: &str, payload: Value) -> Result<Envelope, ServiceError> {
        let id = self.next_id;
        self.next_id += 1;
        write_message(&mut self.stream, &Envelope::request(id, method, path, payload))?;
        let resp = read_message(&mut self.stream)?
            .ok_or_else(|| ServiceError::Protocol("connection closed before response".into()))?;
        if resp.id != id || resp.kind != MessageKind::Response {
            return Err(ServiceError::Protocol(format!("unexpected reply {:?} #{}", resp.kind, resp.id)));
        }
        if resp.method == "error" {
            let field = |k: &str| resp.payload.get(k).and_then(Value::as_str).unwrap_or_default().to_owned();
            return Err(ServiceError::Remote { code: field("code"), message: field("message") });
        }
        Ok(resp)
    }

    /// Next pushed event on a subscribed connection.
    pub fn next_event(&mut self) -> Result<Option<Envelope>, ServiceError> {
        read_message(&mut self.stream)
    }

    pub fn set_read_timeout(&self, t: Option<std::time::Duration>) -> Result<(), ServiceError> {
        Ok(self.stream.set_read_timeout(t)?)
    }
}
