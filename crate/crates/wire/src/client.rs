use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};

use serde_json::{json, Value};

use crate::protocol::{response_result, WireError};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("server closed the connection")]
    Closed,
    #[error("bad response frame: {0}")]
    Frame(String),
    #[error("response id {got} does not match request id {want}")]
    IdMismatch { want: i64, got: Value },
    #[error(transparent)]
    Remote(#[from] WireError),
}

/// Blocking line-oriented client over raw TCP.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    next_id: i64,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Client {
            writer: stream.try_clone()?,
            reader: BufReader::new(stream),
            next_id: 1,
        })
    }

    /// Sends one raw line (a newline is appended).
    pub fn send_line(&mut self, line: &str) -> io::Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()
    }

    /// Reads one response frame.
    pub fn read_frame(&mut self) -> Result<Value, ClientError> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(ClientError::Closed);
        }
        serde_json::from_str(&line).map_err(|e| ClientError::Frame(e.to_string()))
    }

    /// Sends a request and returns its id without waiting.
    pub fn send(&mut self, method: &str, params: Value) -> io::Result<i64> {
        let id = self.next_id;
        self.next_id += 1;
        self.send_line(&json!({"id": id, "method": method, "params": params}).to_string())?;
        Ok(id)
    }

    /// Sends a request and waits for its result.
    pub fn call(&mut self, method: &str, params: Value) -> Result<Value, ClientError> {
        let id = self.send(method, params)?;
        let frame = self.read_frame()?;
        if frame.get("id").and_then(Value::as_i64) != Some(id) {
            return Err(ClientError::IdMismatch {
                want: id,
                got: frame.get("id").cloned().unwrap_or(Value::Null),
            });
        }
        Ok(response_result(&frame)?.clone())
    }
}
