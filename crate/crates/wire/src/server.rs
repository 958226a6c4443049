use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use heprep::event::Session;
use tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tungstenite::{http, Message};

use crate::protocol::Dispatcher;

pub const DEFAULT_PORT: u16 = 7707;
pub const WS_PATH: &str = "/heprep";

/// A running server. Dropping the handle leaves it running; call
/// [`ServerHandle::shutdown`] to stop accepting connections.
pub struct ServerHandle {
    tcp_addr: SocketAddr,
    ws_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
    dispatcher: Dispatcher,
}

impl ServerHandle {
    pub fn tcp_addr(&self) -> SocketAddr {
        self.tcp_addr
    }

    pub fn ws_addr(&self) -> SocketAddr {
        self.ws_addr
    }

    pub fn dispatcher(&self) -> &Dispatcher {
        &self.dispatcher
    }

    /// Stops both accept loops. Open connections finish on their own.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accepts
        let _ = TcpStream::connect(self.tcp_addr);
        let _ = TcpStream::connect(self.ws_addr);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    /// Blocks until the accept loops end.
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

/// Serves raw TCP on `addr` and WebSocket on the next port up.
pub fn serve(addr: SocketAddr, session: Session) -> io::Result<ServerHandle> {
    let ws = SocketAddr::new(
        addr.ip(),
        addr.port()
            .checked_add(1)
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "no port above the TCP port for WebSocket"))?,
    );
    serve_on(addr, ws, session)
}

/// Serves raw TCP on `tcp` and WebSocket on `ws`.
pub fn serve_on(tcp: SocketAddr, ws: SocketAddr, session: Session) -> io::Result<ServerHandle> {
    let tcp_listener = TcpListener::bind(tcp)?;
    let ws_listener = TcpListener::bind(ws)?;
    let tcp_addr = tcp_listener.local_addr()?;
    let ws_addr = ws_listener.local_addr()?;
    let dispatcher = Dispatcher::new(session);
    let stop = Arc::new(AtomicBool::new(false));
    let mut threads = Vec::new();
    for (listener, handler, name) in [
        (tcp_listener, serve_tcp as Handler, "heprep-tcp-accept"),
        (ws_listener, serve_ws as Handler, "heprep-ws-accept"),
    ] {
        let d = dispatcher.clone();
        let stop = stop.clone();
        threads.push(
            thread::Builder::new()
                .name(name.into())
                .spawn(move || accept_loop(listener, stop, d, handler))?,
        );
    }
    Ok(ServerHandle {
        tcp_addr,
        ws_addr,
        stop,
        threads,
        dispatcher,
    })
}

type Handler = fn(TcpStream, Dispatcher) -> io::Result<()>;

fn accept_loop(listener: TcpListener, stop: Arc<AtomicBool>, dispatcher: Dispatcher, handler: Handler) {
    for conn in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let stream = match conn {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_else(|_| "?".into());
        log::info!("connection from {peer}");
        let d = dispatcher.clone();
        let spawned = thread::Builder::new()
            .name(format!("heprep-conn-{peer}"))
            .spawn(move || match handler(stream, d) {
                Ok(()) => log::info!("{peer} disconnected"),
                Err(e) => log::info!("{peer} dropped: {e}"),
            });
        if let Err(e) = spawned {
            log::warn!("could not start connection thread: {e}");
        }
    }
}

fn serve_tcp(stream: TcpStream, dispatcher: Dispatcher) -> io::Result<()> {
    let mut out = stream.try_clone()?;
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut resp = dispatcher.handle_line(&line);
        resp.push('\n');
        out.write_all(resp.as_bytes())?;
        out.flush()?;
    }
    let _ = out.shutdown(Shutdown::Both);
    Ok(())
}

#[allow(clippy::result_large_err)]
fn check_path(req: &Request, resp: Response) -> Result<Response, ErrorResponse> {
    if req.uri().path() == WS_PATH {
        Ok(resp)
    } else {
        let mut e = ErrorResponse::new(Some(format!("WebSocket endpoint is {WS_PATH}")));
        *e.status_mut() = http::StatusCode::NOT_FOUND;
        Err(e)
    }
}

fn serve_ws(stream: TcpStream, dispatcher: Dispatcher) -> io::Result<()> {
    let mut ws = tungstenite::accept_hdr(stream, check_path).map_err(io::Error::other)?;
    loop {
        let msg = match ws.read() {
            Ok(m) => m,
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(io::Error::other(e)),
        };
        let text = match &msg {
            Message::Text(t) => t.as_str().to_string(),
            Message::Binary(b) => String::from_utf8_lossy(b).into_owned(),
            Message::Close(_) => return Ok(()),
            _ => continue,
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let resp = dispatcher.handle_line(line);
            ws.send(Message::text(resp)).map_err(io::Error::other)?;
        }
    }
}
