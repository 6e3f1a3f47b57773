//! Hosts a model behind the wire protocol: a JSONL loop for the subprocess
//! transport and a small HTTP server for the HTTP transport.

use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::sync::Arc;

use tiny_http::{Header, Method, Response, Server};

use crate::adapter::wire::{prediction_to_response, WireError, WireRequest};
use crate::adapter::QaModel;

fn error_line(message: String) -> String {
    serde_json::to_string(&WireError { error: message }).expect("error payload serializes")
}

/// Serves one wire-JSON request per input line, one response per output line,
/// until EOF. Malformed requests and model failures produce `{"error": ...}`
/// lines; the loop keeps going either way.
pub fn run_stdio(
    model: &dyn QaModel,
    input: impl BufRead,
    mut output: impl Write,
) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<WireRequest>(&line) {
            Ok(request) => match model.predict(&request.question, &request.context) {
                Ok(prediction) => serde_json::to_string(&prediction_to_response(&prediction))
                    .expect("responses serialize"),
                Err(e) => error_line(e.to_string()),
            },
            Err(e) => error_line(format!("bad request: {e}")),
        };
        writeln!(output, "{reply}")?;
        output.flush()?;
    }
    Ok(())
}

fn handle(request: &mut tiny_http::Request, model: &dyn QaModel) -> (u16, String) {
    if request.method() != &Method::Post || request.url() != "/predict" {
        return (404, error_line("expected POST /predict".into()));
    }
    let mut body = String::new();
    if let Err(e) = request.as_reader().read_to_string(&mut body) {
        return (400, error_line(format!("unreadable body: {e}")));
    }
    match serde_json::from_str::<WireRequest>(&body) {
        Err(e) => (400, error_line(format!("bad request: {e}"))),
        Ok(wire) => match model.predict(&wire.question, &wire.context) {
            Ok(prediction) => (
                200,
                serde_json::to_string(&prediction_to_response(&prediction))
                    .expect("responses serialize"),
            ),
            Err(e) => (500, error_line(e.to_string())),
        },
    }
}

fn worker_loop(server: Arc<Server>, model: Arc<dyn QaModel>) {
    let content_type: Header =
        "Content-Type: application/json".parse().expect("static header");
    while let Ok(mut request) = server.recv() {
        let (status, body) = handle(&mut request, model.as_ref());
        let response = Response::from_string(body)
            .with_status_code(status)
            .with_header(content_type.clone());
        let _ = request.respond(response);
    }
}

/// A background HTTP server; the listener thread runs until process exit.
pub struct HttpServerHandle {
    addr: SocketAddr,
}

impl HttpServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }
}

const HTTP_WORKERS: usize = 4;

/// Binds `addr` (e.g. "127.0.0.1:0" for an ephemeral port) and serves the
/// model on background threads.
pub fn spawn_http(model: Arc<dyn QaModel>, addr: &str) -> Result<HttpServerHandle, String> {
    let server = Arc::new(Server::http(addr).map_err(|e| format!("cannot bind {addr}: {e}"))?);
    let bound = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| "server has no IP address".to_string())?;
    for _ in 0..HTTP_WORKERS {
        let server = Arc::clone(&server);
        let model = Arc::clone(&model);
        std::thread::spawn(move || worker_loop(server, model));
    }
    Ok(HttpServerHandle { addr: bound })
}

/// Serves on the calling thread, never returning under normal operation.
pub fn run_http_blocking(model: Arc<dyn QaModel>, addr: &str) -> Result<(), String> {
    let server = Arc::new(Server::http(addr).map_err(|e| format!("cannot bind {addr}: {e}"))?);
    if let Some(ip) = server.server_addr().to_ip() {
        eprintln!("serving POST http://{ip}/predict");
    }
    for _ in 0..HTTP_WORKERS - 1 {
        let server = Arc::clone(&server);
        let model = Arc::clone(&model);
        std::thread::spawn(move || worker_loop(server, model));
    }
    worker_loop(server, model);
    Ok(())
}
