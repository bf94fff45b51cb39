//! Static HTTP server for local fixture pages.

use std::path::{Component, Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Response, Server};

use crate::error::{Error, Result};

pub struct FixtureServer {
    server: Arc<Server>,
    root: PathBuf,
    thread: Option<JoinHandle<()>>,
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html" | "htm") => "text/html; charset=utf-8",
        Some("css") => "text/css",
        Some("js") => "application/javascript",
        Some("png") => "image/png",
        Some("svg") => "image/svg+xml",
        Some("json") => "application/json",
        _ => "application/octet-stream",
    }
}

/// Maps a request path onto `root`, refusing anything that escapes it.
fn local_path(root: &Path, url: &str) -> Option<PathBuf> {
    let path = url.split(['?', '#']).next().unwrap_or("");
    let mut out = root.to_path_buf();
    for c in Path::new(path.trim_start_matches('/')).components() {
        match c {
            Component::Normal(p) => out.push(p),
            Component::CurDir => {}
            _ => return None,
        }
    }
    if out.is_dir() {
        out.push("index.html");
    }
    Some(out)
}

impl FixtureServer {
    /// Serves `root` on an ephemeral localhost port.
    pub fn start(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::MissingFile { path: root });
        }
        let server = Arc::new(Server::http("127.0.0.1:0").map_err(|e| Error::Navigation(format!("fixture server: {e}")))?);
        let (srv, dir) = (Arc::clone(&server), root.clone());
        let thread = std::thread::spawn(move || {
            for req in srv.incoming_requests() {
                let resp = match local_path(&dir, req.url()).and_then(|p| std::fs::read(&p).ok().map(|b| (p, b))) {
                    Some((p, bytes)) => {
                        let header = Header::from_bytes("Content-Type", content_type(&p)).expect("static header");
                        Response::from_data(bytes).with_header(header)
                    }
                    None => Response::from_string("not found").with_status_code(404),
                };
                let _ = req.respond(resp);
            }
        });
        Ok(FixtureServer { server, root, thread: Some(thread) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn base_url(&self) -> String {
        let addr = self.server.server_addr().to_ip().expect("tcp listener");
        format!("http://{addr}")
    }

    pub fn url(&self, rel: &str) -> String {
        format!("{}/{}", self.base_url(), rel.trim_start_matches('/'))
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serves_files_and_rejects_escapes() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("index.html"), "<p>Hi</p>").unwrap();
        std::fs::create_dir(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("sub/a.css"), "p{}").unwrap();
        let srv = FixtureServer::start(dir.path()).unwrap();

        let mut r = ureq::get(srv.url("/")).call().unwrap();
        assert_eq!(r.headers().get("content-type").unwrap(), "text/html; charset=utf-8");
        assert_eq!(r.body_mut().read_to_string().unwrap(), "<p>Hi</p>");
        let mut r = ureq::get(srv.url("sub/a.css?v=1")).call().unwrap();
        assert_eq!(r.body_mut().read_to_string().unwrap(), "p{}");
        assert!(ureq::get(srv.url("missing.html")).call().is_err());
        assert_eq!(local_path(dir.path(), "/../etc/passwd"), None);
    }

    #[test]
    fn missing_root_is_an_error() {
        assert!(matches!(FixtureServer::start("/nonexistent/fixtures"), Err(Error::MissingFile { .. })));
    }
}
