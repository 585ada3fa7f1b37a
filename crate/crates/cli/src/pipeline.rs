//! End-to-end experiment steps shared by the commands: dictionary setup,
//! reconstruction, ODF / mode analysis and scoring against ground truth.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use hardi_recon::analysis::{
    false_detection_rate, find_modes_field, match_and_average_error, nmse, odf_from_coefficients, ModeSet, OdfField,
    DEFAULT_MERGE_ANGLE_DEG, DEFAULT_REL_THRESHOLD,
};
use hardi_recon::dictionary::{
    assemble_sensing_matrix, build_gaussian_dictionary, build_ridgelet_dictionary, build_sh_dictionary,
    default_gaussian_kernel, frt_kernel_matrix, frt_quadrature_matrix, Dictionary, RidgeletSpec, SensingMatrix,
    DEFAULT_GAUSSIAN_ROTATIONS,
};
use hardi_recon::field::{apply_a, CoefficientField, SignalField};
use hardi_recon::linalg::Matrix;
use hardi_recon::phantom::{add_rician_noise, phantom_by_name, sample_field, Phantom};
use hardi_recon::solver::{
    sparse_only_reconstruct, sparse_only_reconstruct_prefiltered, split_bregman_reconstruct, SolverParams,
};
use hardi_recon::sphere::{icosphere, select_subset, spiral_hemisphere, Tessellation, UnitDirection};
use hardi_recon::{Error, Result};

/// Spherical harmonic degree of the SH comparator.
pub const SH_MAX_DEGREE: usize = 8;
/// Great-circle nodes used for the Funk–Radon transform of Gaussian atoms.
pub const GAUSSIAN_FRT_NODES: usize = 256;

/// Dictionary choice as spelled on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DictChoice {
    Rdg,
    Sh8,
    Gss,
}

impl DictChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            DictChoice::Rdg => "rdg",
            DictChoice::Sh8 => "sh8",
            DictChoice::Gss => "gss",
        }
    }

    pub fn build(self, ridgelet: &RidgeletSpec, b: f64) -> Result<Dictionary> {
        match self {
            DictChoice::Rdg => build_ridgelet_dictionary(ridgelet),
            DictChoice::Sh8 => build_sh_dictionary(SH_MAX_DEGREE),
            DictChoice::Gss => build_gaussian_dictionary(DEFAULT_GAUSSIAN_ROTATIONS, b, &default_gaussian_kernel()),
        }
    }
}

impl fmt::Display for DictChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DictChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rdg" => Ok(DictChoice::Rdg),
            "sh8" => Ok(DictChoice::Sh8),
            "gss" => Ok(DictChoice::Gss),
            other => Err(Error::InvalidArgument(format!(
                "unknown dictionary '{other}' (expected rdg, sh8 or gss)"
            ))),
        }
    }
}

/// Reconstruction path: voxel-wise sparse coding, or sparse coding with TV.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    Cs,
    Tv,
}

impl SolverMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverMode::Cs => "cs",
            SolverMode::Tv => "tv",
        }
    }
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cs" => Ok(SolverMode::Cs),
            "tv" | "tv-regularized" => Ok(SolverMode::Tv),
            other => Err(Error::InvalidArgument(format!(
                "unknown solver mode '{other}' (expected cs or tv)"
            ))),
        }
    }
}

/// Settings of the ODF peak search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisParams {
    pub rel_threshold: f64,
    pub merge_angle_deg: f64,
    /// Icosphere order of the reference/ODF tessellation.
    pub tessellation_order: usize,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            rel_threshold: DEFAULT_REL_THRESHOLD,
            merge_angle_deg: DEFAULT_MERGE_ANGLE_DEG,
            tessellation_order: 3,
        }
    }
}

/// Sampling directions: a spiral of `k` points, or a greedy `k`-subset of a
/// spiral of `pool` points.
pub fn acquisition_directions(k: usize, pool: Option<usize>) -> Result<Vec<UnitDirection>> {
    match pool {
        None => spiral_hemisphere(k),
        Some(n) => select_subset(&spiral_hemisphere(n)?, k),
    }
}

/// Everything that depends only on (dictionary, b, acquisition directions).
pub struct Setup {
    pub choice: DictChoice,
    pub dictionary: Dictionary,
    pub sensing: SensingMatrix,
    pub tess: Tessellation,
    /// Dictionary sampled at the tessellation vertices.
    pub reference: Matrix,
    /// Funk–Radon transform of each atom at the tessellation vertices.
    pub odf_kernel: Matrix,
}

impl Setup {
    pub fn new(
        choice: DictChoice,
        ridgelet: &RidgeletSpec,
        b: f64,
        directions: &[UnitDirection],
        analysis: &AnalysisParams,
    ) -> Result<Self> {
        let dictionary = choice.build(ridgelet, b)?;
        let sensing = assemble_sensing_matrix(&dictionary, directions)?;
        let tess = icosphere(analysis.tessellation_order)?;
        let reference = assemble_sensing_matrix(&dictionary, &tess.vertices)?.into_matrix();
        let odf_kernel = match choice {
            DictChoice::Gss => frt_quadrature_matrix(&dictionary, &tess, GAUSSIAN_FRT_NODES)?,
            _ => frt_kernel_matrix(&dictionary, &tess)?,
        };
        Ok(Self {
            choice,
            dictionary,
            sensing,
            tess,
            reference,
            odf_kernel,
        })
    }
}

/// Output of one reconstruction.
pub struct Reconstruction {
    pub coefficients: CoefficientField,
    /// Reconstructed signal at the tessellation vertices.
    pub reference_signal: SignalField,
    pub odf: OdfField,
    pub modes: ModeSet,
    pub bregman_iterations: usize,
    pub objective_trace: Vec<f64>,
    pub feasibility_trace: Vec<f64>,
}

pub fn reconstruct(
    setup: &Setup,
    signal: &SignalField,
    mode: SolverMode,
    params: &SolverParams,
    prefilter_tv: bool,
    analysis: &AnalysisParams,
) -> Result<Reconstruction> {
    let a = setup.sensing.matrix();
    let (coefficients, iterations, objective_trace, feasibility_trace) = match mode {
        SolverMode::Cs => {
            let c = if prefilter_tv {
                sparse_only_reconstruct_prefiltered(a, signal, params)?
            } else {
                sparse_only_reconstruct(a, signal, params)?
            };
            (c, 0, Vec::new(), Vec::new())
        }
        SolverMode::Tv => {
            let st = split_bregman_reconstruct(a, signal, params)?;
            (st.c, st.iteration, st.objective_trace, st.feasibility_trace)
        }
    };
    let reference_signal = apply_a(&setup.reference, &coefficients)?;
    let odf = odf_from_coefficients(&coefficients, &setup.odf_kernel, &setup.tess)?;
    let modes = find_modes_field(&odf, &setup.tess, analysis.rel_threshold, analysis.merge_angle_deg)?;
    Ok(Reconstruction {
        coefficients,
        reference_signal,
        odf,
        modes,
        bregman_iterations: iterations,
        objective_trace,
        feasibility_trace,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub nmse: f64,
    pub angular_error_deg: f64,
    pub false_detection_pct: f64,
}

/// Scores reconstructed reference signals and modes against a phantom.
pub fn score(
    phantom: &Phantom,
    b: f64,
    tess: &Tessellation,
    reference_signal: &SignalField,
    modes: &ModeSet,
) -> Result<Metrics> {
    let truth_signal = sample_field(phantom, &tess.vertices, b)?;
    Ok(Metrics {
        nmse: nmse(&truth_signal, reference_signal)?,
        angular_error_deg: match_and_average_error(&phantom.fiber_directions(), &modes.directions())?,
        false_detection_pct: false_detection_rate(&phantom.fiber_counts(), &modes.counts())?,
    })
}

/// Noisy acquisition of a phantom.
pub struct Acquisition {
    pub phantom: Phantom,
    pub directions: Vec<UnitDirection>,
    pub clean: SignalField,
    pub noisy: SignalField,
    pub achieved_snr_db: f64,
}

pub fn acquire(
    phantom_name: &str,
    b: f64,
    k: usize,
    snr_db: f64,
    seed: u64,
    subset_pool: Option<usize>,
) -> Result<Acquisition> {
    let phantom = phantom_by_name(phantom_name)?;
    let directions = acquisition_directions(k, subset_pool)?;
    let clean = sample_field(&phantom, &directions, b)?;
    let (noisy, achieved_snr_db) = add_rician_noise(&clean, snr_db, seed)?;
    Ok(Acquisition {
        phantom,
        directions,
        clean,
        noisy,
        achieved_snr_db,
    })
}
