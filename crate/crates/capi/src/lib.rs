//! C ABI for the diffmap toolkit: opaque handles, integer status codes, and
//! a thread-local last-error message.
//!
//! Every function returns `DM_OK` (0) on success; on failure the returned
//! code classifies the error and `dm_last_error` exposes the message for the
//! calling thread. Pointers returned through out-parameters are owned by the
//! caller and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, CStr, CString};
use std::path::Path;

use diffmap::clustering::cluster;
use diffmap::diffusion::{diffusion_distance, diffusion_map, DistanceMethod};
use diffmap::error::DiffmapError;
use diffmap::kernel::{build_affinity, normalize_markov, select_epsilon, EpsilonRule, KernelConfig};
use diffmap::spectral::{decompose, SpectralDecomposition};
use diffmap::PointCloud;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmStatus {
    DmOk = 0,
    DmErrNullPointer = 1,
    DmErrInvalidArgument = 2,
    DmErrIo = 3,
    DmErrNumeric = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &DiffmapError) -> DmStatus {
    match err {
        DiffmapError::Io(_) | DiffmapError::Parse { .. } => DmStatus::DmErrIo,
        DiffmapError::Solver(_) | DiffmapError::ReducibleGraph { .. } => DmStatus::DmErrNumeric,
        _ => DmStatus::DmErrInvalidArgument,
    }
}

fn fail(err: DiffmapError) -> DmStatus {
    let code = status_of(&err);
    set_error(&err.to_string());
    code
}

/// Message for the most recent failure on the calling thread, or null.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Opaque point-cloud handle.
pub struct DmCloud {
    cloud: PointCloud,
}

/// Opaque model handle: affinity graph spectrum ready for embedding,
/// distances and clustering.
pub struct DmModel {
    decomp: SpectralDecomposition,
    epsilon: f64,
}

/// Loads a cloud from a headered CSV file (`x0,...,x{p-1}[,label]`).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dm_cloud_from_csv(
    path: *const c_char,
    out: *mut *mut DmCloud,
) -> DmStatus {
    if path.is_null() || out.is_null() {
        set_error("null pointer argument");
        return DmStatus::DmErrNullPointer;
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => s,
        Err(_) => {
            set_error("path is not valid UTF-8");
            return DmStatus::DmErrInvalidArgument;
        }
    };
    match PointCloud::load_csv(Path::new(path)) {
        Ok(cloud) => {
            *out = Box::into_raw(Box::new(DmCloud { cloud }));
            DmStatus::DmOk
        }
        Err(e) => fail(e),
    }
}

/// Builds a cloud from a row-major `n x dim` buffer.
///
/// # Safety
/// `data` must point to `n * dim` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dm_cloud_from_data(
    data: *const c_double,
    n: usize,
    dim: usize,
    out: *mut *mut DmCloud,
) -> DmStatus {
    if data.is_null() || out.is_null() {
        set_error("null pointer argument");
        return DmStatus::DmErrNullPointer;
    }
    let slice = std::slice::from_raw_parts(data, n * dim);
    let points = match ndarray_from(slice, n, dim) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    match PointCloud::new(points, None) {
        Ok(cloud) => {
            *out = Box::into_raw(Box::new(DmCloud { cloud }));
            DmStatus::DmOk
        }
        Err(e) => fail(e),
    }
}

fn ndarray_from(
    slice: &[f64],
    n: usize,
    dim: usize,
) -> Result<ndarray::Array2<f64>, DiffmapError> {
    ndarray::Array2::from_shape_vec((n, dim), slice.to_vec())
        .map_err(|e| DiffmapError::Dimension(e.to_string()))
}

/// # Safety
/// `cloud` must come from a `dm_cloud_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dm_cloud_free(cloud: *mut DmCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

/// Number of points.
///
/// # Safety
/// `cloud` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dm_cloud_len(cloud: *const DmCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.cloud.n())
}

/// Ambient dimension.
///
/// # Safety
/// `cloud` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dm_cloud_dim(cloud: *const DmCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.cloud.dim())
}

/// Builds the random-walk spectrum of a cloud.
///
/// `epsilon <= 0` selects the median-of-squared-distances rule; `modes` is
/// the number of retained eigenpairs (>= 2).
///
/// # Safety
/// `cloud` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dm_model_build(
    cloud: *const DmCloud,
    epsilon: c_double,
    modes: usize,
    out: *mut *mut DmModel,
) -> DmStatus {
    let Some(handle) = cloud.as_ref() else {
        set_error("null cloud handle");
        return DmStatus::DmErrNullPointer;
    };
    if out.is_null() {
        set_error("null out pointer");
        return DmStatus::DmErrNullPointer;
    }
    let result = (|| {
        let eps = if epsilon > 0.0 {
            epsilon
        } else {
            select_epsilon(&handle.cloud, EpsilonRule::MedianSqDist)?
        };
        let graph = build_affinity(&handle.cloud, &KernelConfig::gaussian(eps))?;
        let markov = normalize_markov(&graph)?;
        let decomp = decompose(&markov, modes)?;
        Ok::<_, DiffmapError>(DmModel {
            decomp,
            epsilon: eps,
        })
    })();
    match result {
        Ok(model) => {
            *out = Box::into_raw(Box::new(model));
            DmStatus::DmOk
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `model` must come from `dm_model_build` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dm_model_free(model: *mut DmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of retained eigenpairs.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dm_model_modes(model: *const DmModel) -> usize {
    model.as_ref().map_or(0, |m| m.decomp.m())
}

/// Kernel scale the model was built with.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dm_model_epsilon(model: *const DmModel) -> c_double {
    model.as_ref().map_or(f64::NAN, |m| m.epsilon)
}

/// Copies the eigenvalues (descending, starting at 1) into `out`.
///
/// # Safety
/// `out` must hold `len` doubles; `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dm_model_eigenvalues(
    model: *const DmModel,
    out: *mut c_double,
    len: usize,
) -> DmStatus {
    let Some(m) = model.as_ref() else {
        set_error("null model handle");
        return DmStatus::DmErrNullPointer;
    };
    if out.is_null() {
        set_error("null out pointer");
        return DmStatus::DmErrNullPointer;
    }
    if len != m.decomp.m() {
        set_error("output length does not match the number of modes");
        return DmStatus::DmErrInvalidArgument;
    }
    let dst = std::slice::from_raw_parts_mut(out, len);
    dst.copy_from_slice(m.decomp.eigenvalues().as_slice().expect("contiguous"));
    DmStatus::DmOk
}

/// Writes the `n x k` diffusion-map embedding at time `t`, row-major.
///
/// # Safety
/// `out` must hold `n * k` doubles; `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dm_model_embed(
    model: *const DmModel,
    t: c_double,
    k: usize,
    out: *mut c_double,
) -> DmStatus {
    let Some(m) = model.as_ref() else {
        set_error("null model handle");
        return DmStatus::DmErrNullPointer;
    };
    if out.is_null() {
        set_error("null out pointer");
        return DmStatus::DmErrNullPointer;
    }
    match diffusion_map(&m.decomp, t, k) {
        Ok(map) => {
            let dst = std::slice::from_raw_parts_mut(out, m.decomp.n() * k);
            for (d, s) in dst.iter_mut().zip(map.coords.iter()) {
                *d = *s;
            }
            DmStatus::DmOk
        }
        Err(e) => fail(e),
    }
}

/// Diffusion distance between points `i` and `j` at time `t`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dm_model_distance(
    model: *const DmModel,
    i: usize,
    j: usize,
    t: c_double,
    out: *mut c_double,
) -> DmStatus {
    let Some(m) = model.as_ref() else {
        set_error("null model handle");
        return DmStatus::DmErrNullPointer;
    };
    if out.is_null() {
        set_error("null out pointer");
        return DmStatus::DmErrNullPointer;
    }
    match diffusion_distance(&m.decomp, None, i, j, t, DistanceMethod::Spectral) {
        Ok(d) => {
            *out = d;
            DmStatus::DmOk
        }
        Err(e) => fail(e),
    }
}

/// k-means cluster labels in diffusion coordinates at time `t`.
///
/// # Safety
/// `labels_out` must hold `n` entries; `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dm_model_cluster(
    model: *const DmModel,
    k: usize,
    t: c_double,
    seed: u64,
    labels_out: *mut u32,
) -> DmStatus {
    let Some(m) = model.as_ref() else {
        set_error("null model handle");
        return DmStatus::DmErrNullPointer;
    };
    if labels_out.is_null() {
        set_error("null out pointer");
        return DmStatus::DmErrNullPointer;
    }
    let result = (|| {
        let dims = (k.saturating_sub(1)).clamp(1, m.decomp.m() - 1);
        let map = diffusion_map(&m.decomp, t, dims)?;
        cluster(&map, k, seed)
    })();
    match result {
        Ok(res) => {
            let dst = std::slice::from_raw_parts_mut(labels_out, m.decomp.n());
            for (d, l) in dst.iter_mut().zip(res.labels.iter()) {
                *d = *l as u32;
            }
            DmStatus::DmOk
        }
        Err(e) => fail(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_blob_data() -> Vec<f64> {
        // 20 points near (0, 0), 20 near (2.5, 0); close enough to keep the
        // graph numerically connected, far enough to split cleanly
        let mut data = Vec::new();
        for i in 0..20 {
            data.push((i % 5) as f64 * 0.1);
            data.push((i / 5) as f64 * 0.1);
        }
        for i in 0..20 {
            data.push(2.5 + (i % 5) as f64 * 0.1);
            data.push((i / 5) as f64 * 0.1);
        }
        data
    }

    #[test]
    fn full_pipeline_through_the_c_abi() {
        unsafe {
            let data = two_blob_data();
            let mut cloud: *mut DmCloud = std::ptr::null_mut();
            assert_eq!(
                dm_cloud_from_data(data.as_ptr(), 40, 2, &mut cloud),
                DmStatus::DmOk
            );
            assert_eq!(dm_cloud_len(cloud), 40);
            assert_eq!(dm_cloud_dim(cloud), 2);

            let mut model: *mut DmModel = std::ptr::null_mut();
            assert_eq!(dm_model_build(cloud, 0.5, 4, &mut model), DmStatus::DmOk);
            assert_eq!(dm_model_modes(model), 4);
            assert!((dm_model_epsilon(model) - 0.5).abs() < 1e-15);

            let mut eig = [0.0f64; 4];
            assert_eq!(
                dm_model_eigenvalues(model, eig.as_mut_ptr(), 4),
                DmStatus::DmOk
            );
            assert!((eig[0] - 1.0).abs() < 1e-10);
            assert!(eig[1] > 0.9, "two far blobs keep lambda_1 near 1");

            let mut coords = vec![0.0f64; 40 * 2];
            assert_eq!(
                dm_model_embed(model, 1.0, 2, coords.as_mut_ptr()),
                DmStatus::DmOk
            );

            let mut labels = vec![0u32; 40];
            assert_eq!(
                dm_model_cluster(model, 2, 1.0, 7, labels.as_mut_ptr()),
                DmStatus::DmOk
            );
            assert!(labels[..20].iter().all(|&l| l == labels[0]));
            assert!(labels[20..].iter().all(|&l| l == labels[20]));
            assert_ne!(labels[0], labels[20]);

            let mut d_within = 0.0;
            let mut d_across = 0.0;
            assert_eq!(
                dm_model_distance(model, 0, 1, 1.0, &mut d_within),
                DmStatus::DmOk
            );
            assert_eq!(
                dm_model_distance(model, 0, 25, 1.0, &mut d_across),
                DmStatus::DmOk
            );
            assert!(d_across > d_within);

            dm_model_free(model);
            dm_cloud_free(cloud);
        }
    }

    #[test]
    fn errors_set_codes_and_messages() {
        unsafe {
            let mut cloud: *mut DmCloud = std::ptr::null_mut();
            let path = CString::new("/nonexistent/missing.csv").unwrap();
            assert_eq!(
                dm_cloud_from_csv(path.as_ptr(), &mut cloud),
                DmStatus::DmErrIo
            );
            let msg = dm_last_error();
            assert!(!msg.is_null());
            assert!(!CStr::from_ptr(msg).to_str().unwrap().is_empty());

            assert_eq!(
                dm_cloud_from_csv(std::ptr::null(), &mut cloud),
                DmStatus::DmErrNullPointer
            );

            // invalid argument surfaces from the library layer
            let data = two_blob_data();
            assert_eq!(
                dm_cloud_from_data(data.as_ptr(), 40, 2, &mut cloud),
                DmStatus::DmOk
            );
            let mut model: *mut DmModel = std::ptr::null_mut();
            assert_eq!(
                dm_model_build(cloud, 0.5, 0, &mut model),
                DmStatus::DmErrInvalidArgument
            );
            dm_cloud_free(cloud);
        }
    }

    #[test]
    fn generated_header_exists() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/diffmap.h");
        let text = std::fs::read_to_string(header).expect("header generated at build time");
        for symbol in [
            "dm_cloud_from_csv",
            "dm_model_build",
            "dm_model_embed",
            "dm_model_cluster",
            "dm_last_error",
            "DmStatus",
        ] {
            assert!(text.contains(symbol), "{symbol} missing from header");
        }
    }
}
