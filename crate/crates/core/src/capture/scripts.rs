//! Expressions evaluated in the page. The payload in `page_scripts.js`
//! installs `window.__chromalayer`; every other expression calls into it.

use serde_json::{json, Value};

use super::{Ack, TextPaint};
use crate::error::{Error, Result};
use crate::raster::{to_u8, Bgr};

pub const PAGE_SCRIPTS: &str = include_str!("page_scripts.js");

/// `window.__chromalayer.<method>(args...)` with JSON-encoded arguments.
pub fn call(method: &str, args: &[Value]) -> String {
    let args: Vec<String> = args.iter().map(Value::to_string).collect();
    format!("window.__chromalayer.{method}({})", args.join(", "))
}

/// Scripts take colors as `[r, g, b]`.
pub fn rgb(c: Bgr) -> Value {
    json!([to_u8(c.r), to_u8(c.g), to_u8(c.b)])
}

pub fn set_hidden(handles: &[String], hidden: bool) -> String {
    call("setHidden", &[json!(handles), json!(hidden)])
}

pub fn isolate(target: &str) -> String {
    call("isolate", &[json!(target)])
}

pub fn hide_own_text(target: &str) -> String {
    call("hideOwnText", &[json!(target)])
}

pub fn set_root_background(color: Option<Bgr>) -> String {
    call("setRootBackground", &[color.map(rgb).unwrap_or(Value::Null)])
}

pub fn set_text_color(handle: &str, paint: TextPaint) -> String {
    let (mode, color) = match paint {
        TextPaint::Color(c) => ("color", rgb(c)),
        TextPaint::Hidden => ("hidden", Value::Null),
        TextPaint::Restore => ("restore", Value::Null),
    };
    call("setTextColor", &[json!(handle), json!(mode), color])
}

pub fn ack(v: &Value) -> Result<Ack> {
    serde_json::from_value(v.clone()).map_err(|_| Error::Script(format!("unexpected ack {v}")))
}
