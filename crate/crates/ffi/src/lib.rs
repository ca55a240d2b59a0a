//! C ABI over the regrade library.
//!
//! Objects are opaque heap handles created by `rg_*_new`/`rg_*_load`/
//! `rg_solve_transport` and released with the matching `rg_*_free`.
//! Functions return an [`RgStatus`]; on failure `rg_last_error` gives a
//! message for the calling thread. Strings returned through `char **` are
//! owned by the caller and released with `rg_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use regrade::cli::Config;
use regrade::gridmap::{load_heightmap, HeightMap, MapFormat, MetricSpec};
use regrade::nodes::{Node, NodeSet};
use regrade::sim::{make_crater_site, run_episode};
use regrade::transport::{solve_transport, CaseKind, TransportOptions, TransportPlan};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Infeasible = 4,
    Io = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgCase {
    /// Sinks hold at least as much volume as sources.
    SinkExcess = 1,
    /// Sources hold more volume than sinks.
    SourceExcess = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RgMove {
    pub source: usize,
    pub sink: usize,
    pub src_x: f64,
    pub src_y: f64,
    pub dst_x: f64,
    pub dst_y: f64,
    pub volume: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RgMetrics {
    pub grade_deg: f64,
    pub smoothness_m: f64,
    pub area_oos_m2: f64,
    pub area_oos_fraction: f64,
}

pub struct RgNodeSet(NodeSet);
pub struct RgPlan(TransportPlan);
pub struct RgHeightMap(HeightMap);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Failure = (RgStatus, String);

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RgStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RgStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RgStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (RgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (RgStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| (RgStatus::Parse, "string holds a nul byte".to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Last error message on this thread, or NULL. Valid until the next call
/// into this library from the same thread.
#[no_mangle]
pub extern "C" fn rg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn rg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn rg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Empty node set.
#[no_mangle]
pub extern "C" fn rg_nodeset_new() -> *mut RgNodeSet {
    Box::into_raw(Box::new(RgNodeSet(NodeSet::default())))
}

/// # Safety
/// `set` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rg_nodeset_free(set: *mut RgNodeSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

unsafe fn add_node(set: *mut RgNodeSet, node: Node) -> RgStatus {
    guard(|| {
        let set = set.as_mut().ok_or_else(|| null("set"))?;
        if !(node.x.is_finite() && node.y.is_finite() && node.volume > 0.0 && node.volume.is_finite()) {
            return Err((RgStatus::InvalidArgument, "node needs finite coordinates and positive volume".into()));
        }
        match node.kind {
            regrade::nodes::NodeKind::Source => set.0.sources.push(node),
            regrade::nodes::NodeKind::Sink => set.0.sinks.push(node),
        }
        Ok(())
    })
}

/// # Safety
/// `set` must be a live node set handle.
#[no_mangle]
pub unsafe extern "C" fn rg_nodeset_add_source(set: *mut RgNodeSet, x: f64, y: f64, volume: f64) -> RgStatus {
    add_node(set, Node::source(x, y, volume))
}

/// # Safety
/// `set` must be a live node set handle.
#[no_mangle]
pub unsafe extern "C" fn rg_nodeset_add_sink(set: *mut RgNodeSet, x: f64, y: f64, volume: f64) -> RgStatus {
    add_node(set, Node::sink(x, y, volume))
}

/// Parses `{"sources":[{"x","y","v"}...],"sinks":[...]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_nodeset_from_json(json: *const c_char, out: *mut *mut RgNodeSet) -> RgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let set = NodeSet::from_json(text).map_err(|e| (RgStatus::Parse, e))?;
        *out = Box::into_raw(Box::new(RgNodeSet(set)));
        Ok(())
    })
}

/// Minimum-work transport plan for the node set.
///
/// # Safety
/// `set` must be a live node set handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_solve_transport(set: *const RgNodeSet, out: *mut *mut RgPlan) -> RgStatus {
    guard(|| {
        let set = set.as_ref().ok_or_else(|| null("set"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        set.0.validate().map_err(|e| (RgStatus::InvalidArgument, e))?;
        let plan = solve_transport(&set.0, &TransportOptions::default())
            .map_err(|e| (RgStatus::Infeasible, e.to_string()))?;
        *out = Box::into_raw(Box::new(RgPlan(plan)));
        Ok(())
    })
}

/// # Safety
/// `plan` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rg_plan_free(plan: *mut RgPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// # Safety
/// `plan` must be a live plan handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_plan_objective(plan: *const RgPlan, out: *mut f64) -> RgStatus {
    guard(|| {
        let plan = plan.as_ref().ok_or_else(|| null("plan"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = plan.0.objective;
        Ok(())
    })
}

/// # Safety
/// `plan` must be a live plan handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_plan_case(plan: *const RgPlan, out: *mut RgCase) -> RgStatus {
    guard(|| {
        let plan = plan.as_ref().ok_or_else(|| null("plan"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = match plan.0.case.kind {
            CaseKind::SinkExcess => RgCase::SinkExcess,
            CaseKind::SourceExcess => RgCase::SourceExcess,
        };
        Ok(())
    })
}

/// Number of nonzero moves; 0 for a NULL plan.
///
/// # Safety
/// `plan` must be NULL or a live plan handle.
#[no_mangle]
pub unsafe extern "C" fn rg_plan_move_count(plan: *const RgPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.0.moves.len())
}

/// # Safety
/// `plan` must be a live plan handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_plan_move(plan: *const RgPlan, index: usize, out: *mut RgMove) -> RgStatus {
    guard(|| {
        let plan = plan.as_ref().ok_or_else(|| null("plan"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let m = plan.0.moves.get(index).ok_or_else(|| {
            (RgStatus::OutOfRange, format!("move {index} of {}", plan.0.moves.len()))
        })?;
        *out = RgMove {
            source: m.source,
            sink: m.sink,
            src_x: m.from.0,
            src_y: m.from.1,
            dst_x: m.to.0,
            dst_y: m.to.1,
            volume: m.volume,
        };
        Ok(())
    })
}

/// Plan as JSON; free with `rg_string_free`.
///
/// # Safety
/// `plan` must be a live plan handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_plan_to_json(plan: *const RgPlan, out: *mut *mut c_char) -> RgStatus {
    guard(|| {
        let plan = plan.as_ref().ok_or_else(|| null("plan"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        out_string(out, plan.0.to_json())
    })
}

/// Height map from `width × height` row-major heights, first row at the
/// minimum y.
///
/// # Safety
/// `heights` must point to `width * height` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_heightmap_from_heights(
    width: usize,
    height: usize,
    resolution: f64,
    origin_x: f64,
    origin_y: f64,
    heights: *const f64,
    out: *mut *mut RgHeightMap,
) -> RgStatus {
    guard(|| {
        if heights.is_null() {
            return Err(null("heights"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| (RgStatus::InvalidArgument, "map too large".to_string()))?;
        let data = std::slice::from_raw_parts(heights, n).to_vec();
        let map = HeightMap::from_heights(width, height, resolution, (origin_x, origin_y), data)
            .map_err(|e| (RgStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(RgHeightMap(map)));
        Ok(())
    })
}

/// Loads a `.csv` or `.pgm` map. `resolution <= 0` keeps the CSV header
/// value (PGM requires a positive one).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_heightmap_load(
    path: *const c_char,
    resolution: f64,
    scale: f64,
    out: *mut *mut RgHeightMap,
) -> RgStatus {
    guard(|| {
        let path = Path::new(str_arg(path, "path")?);
        if out.is_null() {
            return Err(null("out"));
        }
        let format = MapFormat::from_path(path)
            .ok_or_else(|| (RgStatus::InvalidArgument, "expected a .csv or .pgm path".to_string()))?;
        let res = (resolution > 0.0).then_some(resolution);
        let map = load_heightmap(path, format, scale, res).map_err(|e| {
            let status = match e {
                regrade::gridmap::GridError::Io(_) => RgStatus::Io,
                regrade::gridmap::GridError::Parse { .. } | regrade::gridmap::GridError::ParseBytes { .. } => {
                    RgStatus::Parse
                }
                _ => RgStatus::InvalidArgument,
            };
            (status, e.to_string())
        })?;
        *out = Box::into_raw(Box::new(RgHeightMap(map)));
        Ok(())
    })
}

/// # Safety
/// `map` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rg_heightmap_free(map: *mut RgHeightMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Grade, smoothness and out-of-spec area with an odd `window`.
///
/// # Safety
/// `map` must be a live map handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_heightmap_metrics(
    map: *const RgHeightMap,
    grade_spec_deg: f64,
    smooth_spec_m: f64,
    window: usize,
    out: *mut RgMetrics,
) -> RgStatus {
    guard(|| {
        let map = map.as_ref().ok_or_else(|| null("map"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let spec = MetricSpec {
            grade_deg: grade_spec_deg,
            smooth_m: smooth_spec_m,
            window,
        };
        let m = spec
            .evaluate(&map.0)
            .map_err(|e| (RgStatus::InvalidArgument, e.to_string()))?;
        *out = RgMetrics {
            grade_deg: m.grade,
            smoothness_m: m.smoothness,
            area_oos_m2: m.area_oos,
            area_oos_fraction: m.area_oos_fraction,
        };
        Ok(())
    })
}

/// Runs one grading episode on the configured site and returns the report
/// JSON. `config_json` may be NULL for defaults; it uses the same schema as
/// the command-line config file.
///
/// # Safety
/// `config_json` must be NULL or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_simulate(seed: u64, config_json: *const c_char, out: *mut *mut c_char) -> RgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = if config_json.is_null() {
            Config::default()
        } else {
            Config::from_json(str_arg(config_json, "config_json")?).map_err(|e| (RgStatus::Parse, e))?
        };
        let s = &config.site;
        let site = make_crater_site(s.width, s.height, s.resolution, &s.craters, seed, &config.sim)
            .map_err(|e| (RgStatus::InvalidArgument, e.to_string()))?;
        let (report, _) =
            run_episode(site, &config.sim, &config.metrics).map_err(|e| (RgStatus::InvalidArgument, e.to_string()))?;
        out_string(out, report.to_json())
    })
}
