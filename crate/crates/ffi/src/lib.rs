//! C ABI for `divlam`.
//!
//! Objects are handed out as opaque pointers and released with the matching `*_free`
//! function. Every fallible call returns a [`DivlamStatus`]; on failure the message is
//! available from [`divlam_last_error`] on the same thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use divlam::fieldlab::{divergence_spectral, hminus1_norm, leray_project_with_gap};
use divlam::laminator::{hierarchical_laminate, rasterize, Field, LaminateSchedule};
use divlam::matkit::{build_instance, verify_conditions, InstanceParams, LaminationInstance, Mat, MatrixSet};
use divlam::rigidity::{enumerate_exact, SearchResult};
use divlam::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DivlamStatus {
    Ok = 0,
    NullPointer = 1,
    /// Invalid input: domain, shape, precondition or format errors.
    Invalid = 2,
    /// Resource limit such as the raster memory cap.
    Resource = 3,
    Io = 4,
    /// Caller-provided buffer is too small.
    BufferTooSmall = 5,
    Panic = 6,
}

/// A three-matrix set with its lamination chain.
pub struct DivlamInstance(LaminationInstance);

/// A rasterized matrix field on a periodic grid.
pub struct DivlamField(Field);

/// Outcome of a discrete enumeration.
pub struct DivlamSearch(SearchResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> DivlamStatus {
    match e {
        _ if e.is_resource() => DivlamStatus::Resource,
        Error::Io(_) => DivlamStatus::Io,
        _ => DivlamStatus::Invalid,
    }
}

fn guard(f: impl FnOnce() -> Result<(), DivlamStatus>) -> DivlamStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DivlamStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            DivlamStatus::Panic
        }
    }
}

fn lift<T>(r: divlam::Result<T>) -> Result<T, DivlamStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, DivlamStatus> {
    // SAFETY: the caller guarantees that non-null pointers are valid.
    unsafe { p.as_ref() }.ok_or_else(|| {
        set_error(format!("{what} is null"));
        DivlamStatus::NullPointer
    })
}

fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, DivlamStatus> {
    // SAFETY: the caller guarantees that non-null pointers are valid and writable.
    unsafe { p.as_mut() }.ok_or_else(|| {
        set_error(format!("{what} is null"));
        DivlamStatus::NullPointer
    })
}

unsafe fn mat3_or(p: *const f64, default: Mat) -> Result<Mat, DivlamStatus> {
    if p.is_null() {
        return Ok(default);
    }
    lift(Mat::from_row_slice(3, 3, slice::from_raw_parts(p, 9)))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, DivlamStatus> {
    let s = non_null(p, "path")?;
    CStr::from_ptr(s)
        .to_str()
        .map(Path::new)
        .map_err(|_| {
            set_error("path is not valid UTF-8");
            DivlamStatus::Invalid
        })
}

/// Message of the last failed call on this thread; empty after a success. The pointer
/// stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn divlam_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn divlam_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn divlam_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds the instance for fractions `q[3]`. `g`, `m` and `n` are row-major 3x3
/// matrices; null selects identity, zero and identity respectively.
#[no_mangle]
pub unsafe extern "C" fn divlam_instance_new(
    q: *const f64,
    g: *const f64,
    m: *const f64,
    n: *const f64,
    out: *mut *mut DivlamInstance,
) -> DivlamStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        non_null(q, "q")?;
        let q = slice::from_raw_parts(q, 3);
        let params = lift(InstanceParams::new(
            [q[0], q[1], q[2]],
            mat3_or(g, Mat::identity(3))?,
            mat3_or(m, Mat::zeros(3, 3))?,
            mat3_or(n, Mat::identity(3))?,
        ))?;
        let inst = lift(build_instance(&params))?;
        *out = Box::into_raw(Box::new(DivlamInstance(inst)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn divlam_instance_free(inst: *mut DivlamInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Copies `A_index` (`which = 0`) or `S_index` (`which = 1`), zero-based, into `out[9]`
/// row-major.
#[no_mangle]
pub unsafe extern "C" fn divlam_instance_matrix(
    inst: *const DivlamInstance,
    which: u32,
    index: u32,
    out: *mut f64,
) -> DivlamStatus {
    guard(|| {
        let inst = &non_null(inst, "instance")?.0;
        non_null(out, "out")?;
        if index > 2 || which > 1 {
            set_error(format!("no matrix ({which}, {index})"));
            return Err(DivlamStatus::Invalid);
        }
        let m = if which == 0 { inst.a(index as usize) } else { inst.s(index as usize) };
        slice::from_raw_parts_mut(out, 9).copy_from_slice(m.as_slice());
        Ok(())
    })
}

/// Copies the unit normal of pair `index` into `out[3]`.
#[no_mangle]
pub unsafe extern "C" fn divlam_instance_normal(
    inst: *const DivlamInstance,
    index: u32,
    out: *mut f64,
) -> DivlamStatus {
    guard(|| {
        let inst = &non_null(inst, "instance")?.0;
        non_null(out, "out")?;
        if index > 2 {
            set_error(format!("no normal {index}"));
            return Err(DivlamStatus::Invalid);
        }
        slice::from_raw_parts_mut(out, 3).copy_from_slice(&inst.nu(index as usize));
        Ok(())
    })
}

/// Checks the closure conditions at `tol`.
#[no_mangle]
pub unsafe extern "C" fn divlam_instance_verify(
    inst: *const DivlamInstance,
    tol: f64,
    pass: *mut bool,
    max_residual: *mut f64,
) -> DivlamStatus {
    guard(|| {
        let inst = &non_null(inst, "instance")?.0;
        let report = verify_conditions(inst, tol);
        *out_ptr(pass, "pass")? = report.pass;
        if let Some(r) = max_residual.as_mut() {
            *r = report.max_residual();
        }
        Ok(())
    })
}

/// JSON rendering of the instance; free with [`divlam_string_free`].
#[no_mangle]
pub unsafe extern "C" fn divlam_instance_to_json(
    inst: *const DivlamInstance,
    out: *mut *mut c_char,
) -> DivlamStatus {
    guard(|| {
        let inst = &non_null(inst, "instance")?.0;
        let out = out_ptr(out, "out")?;
        let text = lift(serde_json::to_string(inst).map_err(Error::from))?;
        *out = CString::new(text).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// Rasterizes the multi-scale laminate of `inst` on a `dims[3]` grid.
#[no_mangle]
pub unsafe extern "C" fn divlam_laminate(
    inst: *const DivlamInstance,
    depth: u32,
    ratio: u32,
    base_period: f64,
    dims: *const usize,
    out: *mut *mut DivlamField,
) -> DivlamStatus {
    guard(|| {
        let inst = &non_null(inst, "instance")?.0;
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        non_null(dims, "dims")?;
        let dims = slice::from_raw_parts(dims, 3);
        let schedule = lift(LaminateSchedule::new(inst.clone(), depth, ratio, base_period))?;
        let field = lift(hierarchical_laminate(schedule).and_then(|f| rasterize(&f, dims)))?;
        *out = Box::into_raw(Box::new(DivlamField(field)));
        Ok(())
    })
}

/// Wraps a copy of `data` (`cells * m * n` values, odometer order, row-major matrices)
/// as a field on a grid of `ndims` extents.
#[no_mangle]
pub unsafe extern "C" fn divlam_field_from_data(
    dims: *const usize,
    ndims: usize,
    m: usize,
    n: usize,
    data: *const f64,
    out: *mut *mut DivlamField,
) -> DivlamStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        non_null(dims, "dims")?;
        non_null(data, "data")?;
        let dims = slice::from_raw_parts(dims, ndims).to_vec();
        let len = dims.iter().product::<usize>() * m * n;
        let values = slice::from_raw_parts(data, len).to_vec();
        let raster = lift(divlam::laminator::Raster::new(dims, m, n, values))?;
        *out = Box::into_raw(Box::new(DivlamField(Field::from_raster(raster))));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn divlam_field_load(path: *const c_char, out: *mut *mut DivlamField) -> DivlamStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let field = lift(divlam::io::load_field(path_arg(path)?, None))?;
        *out = Box::into_raw(Box::new(DivlamField(field)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn divlam_field_save(field: *const DivlamField, path: *const c_char) -> DivlamStatus {
    guard(|| {
        let field = &non_null(field, "field")?.0;
        lift(divlam::io::save_field(path_arg(path)?, field))
    })
}

#[no_mangle]
pub unsafe extern "C" fn divlam_field_free(field: *mut DivlamField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Number of stored values (`cells * m * n`).
#[no_mangle]
pub unsafe extern "C" fn divlam_field_len(field: *const DivlamField, len: *mut usize) -> DivlamStatus {
    guard(|| {
        let field = &non_null(field, "field")?.0;
        *out_ptr(len, "len")? = lift(field.require_raster())?.data().len();
        Ok(())
    })
}

/// Copies the field values into `buf[cap]`.
#[no_mangle]
pub unsafe extern "C" fn divlam_field_copy(field: *const DivlamField, buf: *mut f64, cap: usize) -> DivlamStatus {
    guard(|| {
        let data = lift(non_null(field, "field")?.0.require_raster())?.data();
        non_null(buf, "buf")?;
        if cap < data.len() {
            set_error(format!("buffer holds {cap} values, need {}", data.len()));
            return Err(DivlamStatus::BufferTooSmall);
        }
        slice::from_raw_parts_mut(buf, data.len()).copy_from_slice(data);
        Ok(())
    })
}

/// Homogeneous H^-1 norm of the spectral divergence.
#[no_mangle]
pub unsafe extern "C" fn divlam_field_hminus1_div(field: *const DivlamField, out: *mut f64) -> DivlamStatus {
    guard(|| {
        let field = &non_null(field, "field")?.0;
        let v = lift(divergence_spectral(field).and_then(|d| hminus1_norm(&d)))?;
        *out_ptr(out, "out")? = v;
        Ok(())
    })
}

/// Leray projection; `gap` (optional) receives the L2 distance moved.
#[no_mangle]
pub unsafe extern "C" fn divlam_field_project(
    field: *const DivlamField,
    out: *mut *mut DivlamField,
    gap: *mut f64,
) -> DivlamStatus {
    guard(|| {
        let field = &non_null(field, "field")?.0;
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let (p, g) = lift(leray_project_with_gap(field))?;
        if let Some(gap) = gap.as_mut() {
            *gap = g;
        }
        *out = Box::into_raw(Box::new(DivlamField(p)));
        Ok(())
    })
}

/// Enumerates fields with values in `K` (`count` matrices of shape `m x n`, stored
/// consecutively row-major) on a periodic grid with `n` extents `dims`.
#[no_mangle]
pub unsafe extern "C" fn divlam_search(
    k: *const f64,
    count: usize,
    m: usize,
    n: usize,
    dims: *const usize,
    max_nodes: u64,
    out: *mut *mut DivlamSearch,
) -> DivlamStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        non_null(k, "K")?;
        non_null(dims, "dims")?;
        let values = slice::from_raw_parts(k, count * m * n);
        let mats = lift(
            values
                .chunks(m * n)
                .map(|c| Mat::from_row_slice(m, n, c))
                .collect::<divlam::Result<Vec<_>>>(),
        )?;
        let set = lift(MatrixSet::new(mats))?;
        let dims = slice::from_raw_parts(dims, n);
        let result = lift(enumerate_exact(&set, dims, max_nodes))?;
        *out = Box::into_raw(Box::new(DivlamSearch(result)));
        Ok(())
    })
}

/// Solution count and whether the search space was fully explored.
#[no_mangle]
pub unsafe extern "C" fn divlam_search_summary(
    search: *const DivlamSearch,
    count: *mut usize,
    exhausted: *mut bool,
) -> DivlamStatus {
    guard(|| {
        let r = &non_null(search, "search")?.0;
        *out_ptr(count, "count")? = r.count;
        if let Some(e) = exhausted.as_mut() {
            *e = r.exhausted;
        }
        Ok(())
    })
}

/// Copies solution `index` (one index into `K` per cell) into `buf[cap]`.
#[no_mangle]
pub unsafe extern "C" fn divlam_search_witness(
    search: *const DivlamSearch,
    index: usize,
    buf: *mut usize,
    cap: usize,
) -> DivlamStatus {
    guard(|| {
        let r = &non_null(search, "search")?.0;
        non_null(buf, "buf")?;
        let w = r.solutions.get(index).ok_or_else(|| {
            set_error(format!("no stored solution {index}"));
            DivlamStatus::Invalid
        })?;
        if cap < w.len() {
            set_error(format!("buffer holds {cap} cells, need {}", w.len()));
            return Err(DivlamStatus::BufferTooSmall);
        }
        slice::from_raw_parts_mut(buf, w.len()).copy_from_slice(w);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn divlam_search_free(search: *mut DivlamSearch) {
    if !search.is_null() {
        drop(Box::from_raw(search));
    }
}
