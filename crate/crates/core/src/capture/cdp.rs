//! DevTools protocol client and the browser-backed [`PageOps`].

use std::collections::BTreeMap;
use std::net::TcpStream;
use std::time::{Duration, Instant};

use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

use super::{scripts, Ack, CaptureConfig, PageMetadata, PageOps, TextPaint};
use crate::codec;
use crate::error::{Error, Result};
use crate::raster::{Bgr, BgrRaster, Rect};

#[derive(Debug, Deserialize)]
struct TargetInfo {
    #[serde(rename = "type")]
    kind: String,
    #[serde(rename = "webSocketDebuggerUrl", default)]
    ws_url: Option<String>,
}

/// Resolves a DevTools endpoint to a page websocket URL. `ws://` URLs are
/// used as given; for `http://host:port` a new blank target is opened, or
/// the first existing page is taken if the browser refuses.
pub fn discover_target(endpoint: &str) -> Result<String> {
    if endpoint.starts_with("ws://") || endpoint.starts_with("wss://") {
        return Ok(endpoint.to_string());
    }
    let base = endpoint.trim_end_matches('/');
    let proto = |e: ureq::Error| Error::Protocol(format!("{base}: {e}"));
    if let Ok(mut resp) = ureq::put(format!("{base}/json/new?about:blank")).send_empty() {
        if let Ok(t) = resp.body_mut().read_json::<TargetInfo>() {
            if let Some(url) = t.ws_url {
                return Ok(url);
            }
        }
    }
    let targets: Vec<TargetInfo> = ureq::get(format!("{base}/json/list")).call().map_err(proto)?.body_mut().read_json().map_err(proto)?;
    targets
        .into_iter()
        .find(|t| t.kind == "page")
        .and_then(|t| t.ws_url)
        .ok_or_else(|| Error::Protocol(format!("{base}: no page target")))
}

/// A single DevTools websocket session. Commands are strictly sequential.
pub struct CdpSession {
    socket: WebSocket<MaybeTlsStream<TcpStream>>,
    next_id: u64,
    timeout: Duration,
    events: Vec<Value>,
}

impl CdpSession {
    pub fn connect(ws_url: &str, timeout: Duration) -> Result<Self> {
        let (socket, _) = tungstenite::connect(ws_url).map_err(|e| Error::Protocol(format!("{ws_url}: {e}")))?;
        if let MaybeTlsStream::Plain(s) = socket.get_ref() {
            s.set_read_timeout(Some(Duration::from_millis(200))).map_err(|e| Error::Protocol(e.to_string()))?;
        }
        Ok(CdpSession { socket, next_id: 1, timeout, events: Vec::new() })
    }

    fn read(&mut self, deadline: Instant) -> Result<Option<Value>> {
        loop {
            if Instant::now() >= deadline {
                return Err(Error::Timeout(self.timeout));
            }
            match self.socket.read() {
                Ok(Message::Text(t)) => return serde_json::from_str(&t).map(Some).map_err(|e| Error::Protocol(e.to_string())),
                Ok(Message::Close(_)) => return Err(Error::Protocol("connection closed".into())),
                Ok(_) => {}
                Err(tungstenite::Error::Io(e)) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {
                    return Ok(None)
                }
                Err(e) => return Err(Error::Protocol(e.to_string())),
            }
        }
    }

    /// Sends a command and waits for its response; events received meanwhile are queued.
    pub fn send(&mut self, method: &str, params: Value) -> Result<Value> {
        let id = self.next_id;
        self.next_id += 1;
        let msg = json!({"id": id, "method": method, "params": params});
        self.socket.send(Message::Text(msg.to_string())).map_err(|e| Error::Protocol(e.to_string()))?;
        let deadline = Instant::now() + self.timeout;
        loop {
            let Some(v) = self.read(deadline)? else { continue };
            if v.get("id").and_then(Value::as_u64) == Some(id) {
                if let Some(err) = v.get("error") {
                    return Err(Error::Protocol(format!("{method}: {err}")));
                }
                return Ok(v.get("result").cloned().unwrap_or(Value::Null));
            }
            if v.get("method").is_some() {
                self.events.push(v);
            }
        }
    }

    /// Waits for an event named `method`, consuming queued events first.
    pub fn wait_event(&mut self, method: &str, timeout: Duration) -> Result<Value> {
        if let Some(i) = self.events.iter().position(|e| e["method"] == method) {
            return Ok(self.events.remove(i));
        }
        let deadline = Instant::now() + timeout;
        loop {
            if Instant::now() >= deadline {
                return Err(Error::Timeout(timeout));
            }
            let Some(v) = self.read(deadline)? else { continue };
            if v["method"] == method {
                return Ok(v);
            }
        }
    }

    /// Evaluates an expression and returns its JSON value.
    pub fn evaluate(&mut self, expression: &str) -> Result<Value> {
        let r = self.send("Runtime.evaluate", json!({"expression": expression, "returnByValue": true, "awaitPromise": true}))?;
        if let Some(ex) = r.get("exceptionDetails") {
            let text = ex.pointer("/exception/description").or_else(|| ex.get("text")).cloned().unwrap_or(Value::Null);
            return Err(Error::Script(text.as_str().map(str::to_string).unwrap_or_else(|| text.to_string())));
        }
        Ok(r.pointer("/result/value").cloned().unwrap_or(Value::Null))
    }
}

/// A browser tab driven over the DevTools protocol.
pub struct CdpPage {
    session: CdpSession,
    cfg: CaptureConfig,
}

impl CdpPage {
    pub fn new(session: CdpSession, cfg: CaptureConfig) -> Self {
        CdpPage { session, cfg }
    }

    pub fn open(cfg: &CaptureConfig) -> Result<Self> {
        let url = discover_target(&cfg.devtools)?;
        Ok(CdpPage::new(CdpSession::connect(&url, cfg.timeout())?, cfg.clone()))
    }

    fn eval<T: for<'de> Deserialize<'de>>(&mut self, expr: &str) -> Result<T> {
        let v = self.session.evaluate(expr)?;
        serde_json::from_value(v).map_err(|e| Error::Script(format!("{expr}: {e}")))
    }

    fn eval_ack(&mut self, expr: &str) -> Result<Ack> {
        let v = self.session.evaluate(expr)?;
        scripts::ack(&v)
    }
}

impl PageOps for CdpPage {
    fn navigate(&mut self, url: &str, timeout: Duration) -> Result<()> {
        let (w, h) = self.cfg.viewport;
        self.session.send("Page.enable", json!({}))?;
        self.session.send(
            "Emulation.setDeviceMetricsOverride",
            json!({"width": w, "height": h, "deviceScaleFactor": 1, "mobile": false}),
        )?;
        let r = self.session.send("Page.navigate", json!({"url": url}))?;
        if let Some(err) = r.get("errorText").and_then(Value::as_str) {
            return Err(Error::Navigation(format!("{url}: {err}")));
        }
        self.session.wait_event("Page.loadEventFired", timeout)?;
        Ok(())
    }

    fn prepare(&mut self) -> Result<()> {
        self.session.evaluate(scripts::PAGE_SCRIPTS)?;
        std::thread::sleep(Duration::from_millis(self.cfg.settle_ms));
        Ok(())
    }

    fn collect_metadata(&mut self) -> Result<PageMetadata> {
        self.eval(&scripts::call("collectMetadata", &[]))
    }

    fn set_hidden(&mut self, handles: &[String], hidden: bool) -> Result<Vec<Ack>> {
        let v: Vec<Value> = self.eval(&scripts::set_hidden(handles, hidden))?;
        v.iter().map(scripts::ack).collect()
    }

    fn isolate(&mut self, target: &str) -> Result<Ack> {
        self.eval_ack(&scripts::isolate(target))
    }

    fn hide_own_text(&mut self, target: &str) -> Result<Ack> {
        self.eval_ack(&scripts::hide_own_text(target))
    }

    fn set_root_background(&mut self, color: Option<Bgr>) -> Result<()> {
        self.eval_ack(&scripts::set_root_background(color)).map(|_| ())
    }

    fn set_text_color(&mut self, handle: &str, paint: TextPaint) -> Result<Ack> {
        self.eval_ack(&scripts::set_text_color(handle, paint))
    }

    fn restore_styles(&mut self) -> Result<()> {
        self.eval_ack(&scripts::call("restoreAll", &[])).map(|_| ())
    }

    fn inline_styles(&mut self) -> Result<BTreeMap<String, Option<String>>> {
        self.eval(&scripts::call("inlineStyles", &[]))
    }

    fn mutation_count(&mut self) -> Result<u64> {
        self.eval(&scripts::call("mutationCount", &[]))
    }

    fn screenshot(&mut self, clip: Rect) -> Result<BgrRaster> {
        let r = self.session.send(
            "Page.captureScreenshot",
            json!({
                "format": "png",
                "clip": {"x": clip.x, "y": clip.y, "width": clip.w, "height": clip.h, "scale": 1},
                "captureBeyondViewport": false,
            }),
        )?;
        let data = r.get("data").and_then(Value::as_str).ok_or_else(|| Error::Protocol("screenshot without data".into()))?;
        let bytes = base64::engine::general_purpose::STANDARD.decode(data).map_err(|e| Error::Protocol(e.to_string()))?;
        codec::decode_bgr(&bytes).map_err(Error::Protocol)
    }
}
