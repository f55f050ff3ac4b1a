//! C ABI over the duagate middleware.
//!
//! Graphs and middleware instances cross the boundary as opaque handles.
//! Every fallible call returns a [`DgStatus`]; on failure the message is kept
//! per thread and read with [`dg_last_error`]. Structured results come back
//! as JSON strings owned by the caller and released with [`dg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use duagate::middleware::{MiddlewareConfig, MiddlewareError, TrustedMiddleware};
use duagate::ontology::{bootstrap_vocabulary, DuaRecord};
use duagate::policy::{DataRequest, PolicyRegistry};
use duagate::query::{eval_ask, eval_select, eval_update, Query, QueryForm};
use duagate::store::{load_lines, serialize_lines, Graph};
use duagate::synth::{generate, GeneratorSpec};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Malformed query, triple line, JSON or TOML.
    Parse = 3,
    NotFound = 4,
    Invalid = 5,
    Conflict = 6,
    /// A Rust panic was caught at the boundary; the handle may be unusable.
    Panic = 7,
}

/// An RDF graph.
pub struct DgGraph(Graph);

/// A middleware instance. Calls on one handle may come from several threads.
pub struct DgMiddleware(TrustedMiddleware);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(DgStatus, String);

impl From<MiddlewareError> for Failure {
    fn from(e: MiddlewareError) -> Self {
        let status = match &e {
            MiddlewareError::NotFound(_) => DgStatus::NotFound,
            MiddlewareError::Conflict(_) => DgStatus::Conflict,
            MiddlewareError::Invalid(_) | MiddlewareError::Replay(_) | MiddlewareError::Io(_) => DgStatus::Invalid,
        };
        Failure(status, e.to_string())
    }
}

fn parse_error(e: impl std::fmt::Display) -> Failure {
    Failure(DgStatus::Parse, e.to_string())
}

fn set_error(message: String) {
    // interior NULs would truncate the message on the C side anyway
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            DgStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {message}"));
            DgStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a NUL-terminated string valid for the call.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(DgStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(DgStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// # Safety
/// `p` is null or points to a live handle of type `T`.
unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(DgStatus::NullArgument, format!("{what} is null")))
}

/// # Safety
/// `out` is null or writable.
unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(DgStatus::NullArgument, "output pointer is null".into()));
    }
    out.write(value);
    Ok(())
}

/// # Safety
/// `out` is null or writable.
unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|e| Failure(DgStatus::Invalid, e.to_string()))?;
    put(out, c.into_raw())
}

fn json(value: &impl serde::Serialize) -> Result<String, Failure> {
    serde_json::to_string(value).map_err(|e| Failure(DgStatus::Invalid, e.to_string()))
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dg_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` is null or came from this library and has not been freed.
#[no_mangle]
pub unsafe extern "C" fn dg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// An empty graph. Never null.
#[no_mangle]
pub extern "C" fn dg_graph_new() -> *mut DgGraph {
    Box::into_raw(Box::new(DgGraph(Graph::new())))
}

/// The synthetic universe for `seed` with `patients` patients.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dg_graph_generate(seed: u64, patients: usize, out: *mut *mut DgGraph) -> DgStatus {
    guard(|| {
        let g = generate(&GeneratorSpec::new(seed, patients)).map_err(|e| Failure(DgStatus::Invalid, e.to_string()))?;
        put(out, Box::into_raw(Box::new(DgGraph(g))))
    })
}

/// Adds the triples in `lines` (line format) and writes how many were new to
/// `added`, which may be null. Nothing is added unless every line parses.
///
/// # Safety
/// `graph` is a live handle not used concurrently; `lines` is a C string.
#[no_mangle]
pub unsafe extern "C" fn dg_graph_load(graph: *mut DgGraph, lines: *const c_char, added: *mut usize) -> DgStatus {
    guard(|| {
        let g = graph
            .as_mut()
            .ok_or_else(|| Failure(DgStatus::NullArgument, "graph is null".into()))?;
        let n = load_lines(&mut g.0, text(lines, "lines")?.as_bytes()).map_err(parse_error)?;
        if !added.is_null() {
            added.write(n);
        }
        Ok(())
    })
}

/// Triple count; 0 for null.
///
/// # Safety
/// `graph` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dg_graph_len(graph: *const DgGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.len())
}

/// The graph in line format, sorted.
///
/// # Safety
/// `graph` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dg_graph_serialize(graph: *const DgGraph, out: *mut *mut c_char) -> DgStatus {
    guard(|| put_string(out, serialize_lines(&handle(graph, "graph")?.0)))
}

/// # Safety
/// `graph` is null or a live handle that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dg_graph_free(graph: *mut DgGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Runs a query. ASK yields `{"boolean":b}`, SELECT yields
/// `{"variables":[..],"rows":[[..]]}` and an update yields
/// `{"deleted":n,"inserted":m}` after modifying the graph.
///
/// # Safety
/// `graph` is a live handle not used concurrently; `query` is a C string;
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dg_query(graph: *mut DgGraph, query: *const c_char, out: *mut *mut c_char) -> DgStatus {
    guard(|| {
        let g = graph
            .as_mut()
            .ok_or_else(|| Failure(DgStatus::NullArgument, "graph is null".into()))?;
        let q = Query::parse(text(query, "query")?).map_err(parse_error)?;
        let eval_failed = |e: duagate::query::QueryError| Failure(DgStatus::Invalid, e.to_string());
        let body = match q.form {
            QueryForm::Ask => json(&serde_json::json!({ "boolean": eval_ask(&q, &g.0).map_err(eval_failed)? }))?,
            QueryForm::Select => json(&eval_select(&q, &g.0).map_err(eval_failed)?)?,
            QueryForm::Update => json(&eval_update(&q, &mut g.0).map_err(eval_failed)?)?,
        };
        put_string(out, body)
    })
}

/// A middleware instance over `graph` with the built-in policies. The graph
/// handle is consumed on success and on failure. `config_toml` may be null
/// for defaults.
///
/// # Safety
/// `graph` is a live handle not used afterwards; `config_toml` is null or a
/// C string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dg_middleware_new(
    graph: *mut DgGraph,
    config_toml: *const c_char,
    out: *mut *mut DgMiddleware,
) -> DgStatus {
    guard(|| {
        if graph.is_null() {
            return Err(Failure(DgStatus::NullArgument, "graph is null".into()));
        }
        let mut g = Box::from_raw(graph).0;
        let config = if config_toml.is_null() {
            MiddlewareConfig::default()
        } else {
            MiddlewareConfig::from_toml(text(config_toml, "config")?).map_err(parse_error)?
        };
        bootstrap_vocabulary(&mut g);
        let tm = TrustedMiddleware::new(g, config, PolicyRegistry::builtin());
        put(out, Box::into_raw(Box::new(DgMiddleware(tm))))
    })
}

/// Handles one data request given as JSON and writes the response as JSON.
///
/// # Safety
/// `tm` is a live handle; `request_json` is a C string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dg_middleware_handle_request(
    tm: *const DgMiddleware,
    request_json: *const c_char,
    out: *mut *mut c_char,
) -> DgStatus {
    guard(|| {
        let tm = handle(tm, "middleware")?;
        let req: DataRequest = serde_json::from_str(text(request_json, "request")?).map_err(parse_error)?;
        let resp = tm.0.handle_request(&req)?;
        put_string(out, json(&resp)?)
    })
}

/// The trust record of a user or organization IRI as JSON.
///
/// # Safety
/// `tm` is a live handle; `principal` is a C string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dg_middleware_trust(
    tm: *const DgMiddleware,
    principal: *const c_char,
    out: *mut *mut c_char,
) -> DgStatus {
    guard(|| {
        let tm = handle(tm, "middleware")?;
        let iri = text(principal, "principal")?;
        let rec =
            tm.0.trust_record(iri)
                .ok_or_else(|| Failure(DgStatus::NotFound, format!("<{iri}> is not a user or organization")))?;
        put_string(out, json(&rec)?)
    })
}

/// Rewrites an agreement (JSON) and resets the lockout it caused. Fails with
/// `Conflict` when the pair is not locked out.
///
/// # Safety
/// `tm` is a live handle; `dua_json` is a C string.
#[no_mangle]
pub unsafe extern "C" fn dg_middleware_rewrite_dua(tm: *const DgMiddleware, dua_json: *const c_char) -> DgStatus {
    guard(|| {
        let tm = handle(tm, "middleware")?;
        let dua: DuaRecord = serde_json::from_str(text(dua_json, "agreement")?).map_err(parse_error)?;
        Ok(tm.0.rewrite_dua(&dua)?)
    })
}

/// # Safety
/// `tm` is null or a live handle that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dg_middleware_free(tm: *mut DgMiddleware) {
    if !tm.is_null() {
        drop(Box::from_raw(tm));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    unsafe fn take(s: *mut c_char) -> String {
        let out = CStr::from_ptr(s).to_str().unwrap().to_string();
        dg_string_free(s);
        out
    }

    #[test]
    fn null_arguments_are_reported_not_dereferenced() {
        unsafe {
            let mut out = ptr::null_mut();
            assert_eq!(
                dg_query(ptr::null_mut(), c("ASK {}").as_ptr(), &mut out),
                DgStatus::NullArgument
            );
            assert!(out.is_null());
            let msg = CStr::from_ptr(dg_last_error()).to_str().unwrap();
            assert!(msg.contains("graph"), "{msg}");
            assert_eq!(dg_graph_len(ptr::null()), 0);
            dg_graph_free(ptr::null_mut());
            dg_string_free(ptr::null_mut());
        }
    }

    #[test]
    fn success_clears_the_last_error() {
        unsafe {
            let g = dg_graph_new();
            assert_eq!(
                dg_graph_load(g, c("not a triple").as_ptr(), ptr::null_mut()),
                DgStatus::Parse
            );
            assert!(!dg_last_error().is_null());
            let mut n = 0;
            let line = "<http://example.org/a> <http://example.org/p> \"x\" .\n";
            assert_eq!(dg_graph_load(g, c(line).as_ptr(), &mut n), DgStatus::Ok);
            assert_eq!((n, dg_graph_len(g)), (1, 1));
            assert!(dg_last_error().is_null());
            dg_graph_free(g);
        }
    }

    #[test]
    fn invalid_utf8_is_rejected() {
        unsafe {
            let g = dg_graph_new();
            let bad = [0xffu8, 0xfe, 0];
            assert_eq!(
                dg_graph_load(g, bad.as_ptr().cast(), ptr::null_mut()),
                DgStatus::InvalidUtf8
            );
            dg_graph_free(g);
        }
    }

    #[test]
    fn query_forms_return_json() {
        unsafe {
            let g = dg_graph_new();
            let lines = "<http://example.org/a> <http://example.org/p> \"x\" .\n";
            dg_graph_load(g, c(lines).as_ptr(), ptr::null_mut());
            let mut out = ptr::null_mut();
            let ask = "ASK { <http://example.org/a> <http://example.org/p> ?o }";
            assert_eq!(dg_query(g, c(ask).as_ptr(), &mut out), DgStatus::Ok);
            assert_eq!(take(out), r#"{"boolean":true}"#);

            let update = "DELETE { ?s <http://example.org/p> ?o } INSERT { ?s <http://example.org/p> \"y\" } WHERE { ?s <http://example.org/p> ?o }";
            assert_eq!(dg_query(g, c(update).as_ptr(), &mut out), DgStatus::Ok);
            assert_eq!(take(out), r#"{"deleted":1,"inserted":1}"#);

            let select = "SELECT ?o WHERE { ?s <http://example.org/p> ?o }";
            assert_eq!(dg_query(g, c(select).as_ptr(), &mut out), DgStatus::Ok);
            let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
            assert_eq!(v["variables"], serde_json::json!(["o"]));
            assert_eq!(v["rows"].as_array().unwrap().len(), 1);

            assert_eq!(dg_query(g, c("SELECT").as_ptr(), &mut out), DgStatus::Parse);
            dg_graph_free(g);
        }
    }
}
