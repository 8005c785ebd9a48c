//! State files, branch CSV and JSON sidecars.
//!
//! Reals in JSON use the shortest decimal that round-trips; CSV columns use
//! 17 significant digits. Both reproduce every `f64` bit for bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::continuation::{Branch, Termination};
use crate::error::{Result, VStateError};
use crate::fourier::{FourierConformalMap, SpectralGrid};
use crate::linear::Sign;
use crate::residual::PatchState;

pub const STATE_FORMAT: &str = "vstate-patch/1";
pub const BRANCH_FORMAT: &str = "vstate-branch/1";
pub const CSV_HEADER: &str = "index,lambda,omega,t,a_1_1,a_2_1,residual_sup";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub format: String,
    pub m: usize,
    pub b: f64,
    pub lambda: f64,
    pub omega: f64,
    pub outer: Vec<f64>,
    pub inner: Vec<f64>,
}

impl StateFile {
    pub fn from_state(state: &PatchState) -> Self {
        Self {
            format: STATE_FORMAT.into(),
            m: state.fold(),
            b: state.b(),
            lambda: state.lambda,
            omega: state.omega(),
            outer: state.outer.coeffs().to_vec(),
            inner: state.inner.coeffs().to_vec(),
        }
    }

    pub fn to_state(&self) -> Result<PatchState> {
        if self.format != STATE_FORMAT {
            return Err(VStateError::InvalidState(format!("unsupported format {:?}", self.format)));
        }
        let outer = FourierConformalMap::new(1.0, self.m, self.outer.clone())
            .map_err(|e| VStateError::InvalidState(e.to_string()))?;
        let inner = FourierConformalMap::new(self.b, self.m, self.inner.clone())
            .map_err(|e| VStateError::InvalidState(e.to_string()))?;
        let state = PatchState::new(outer, inner, self.lambda)?;
        let grid = SpectralGrid::new(state.modes().max(1), self.m).map_err(|e| VStateError::InvalidState(e.to_string()))?;
        state.check_geometry(&grid).map_err(|e| VStateError::InvalidState(e.to_string()))?;
        Ok(state)
    }
}

pub fn state_to_json(state: &PatchState) -> String {
    serde_json::to_string_pretty(&StateFile::from_state(state)).expect("state serializes")
}

pub fn state_from_json(text: &str) -> Result<PatchState> {
    let file: StateFile = serde_json::from_str(text).map_err(|e| VStateError::Malformed(e.to_string()))?;
    file.to_state()
}

pub fn save_state(path: &Path, state: &PatchState) -> Result<()> {
    std::fs::write(path, state_to_json(state) + "\n")?;
    Ok(())
}

pub fn load_state(path: &Path) -> Result<PatchState> {
    state_from_json(&std::fs::read_to_string(path)?)
}

/// `{:.16e}` keeps 17 significant digits.
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn branch_csv(branch: &Branch) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (i, p) in branch.points.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{}",
            real(p.lambda),
            real(p.omega),
            real(p.t),
            real(p.coeffs[0]),
            real(p.coeffs[1]),
            real(p.residual_sup)
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarPoint {
    pub lambda: f64,
    pub omega: f64,
    pub t: f64,
    pub arclength: f64,
    pub residual_sup: f64,
    pub outer: Vec<f64>,
    pub inner: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub struct BranchSidecar {
    pub format: String,
    pub m: usize,
    pub b: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub nodes: usize,
    pub origin_sign: Sign,
    pub closed: bool,
    pub termination: Termination,
    pub trivial_hits: Vec<f64>,
    pub trivial_hits_omega: Vec<f64>,
    pub ds0: f64,
    pub points: Vec<SidecarPoint>,
}

impl BranchSidecar {
    pub fn from_branch(branch: &Branch) -> Self {
        Self {
            format: BRANCH_FORMAT.into(),
            m: branch.m,
            b: branch.b,
            n: branch.modes,
            nodes: branch.nodes,
            origin_sign: branch.origin_sign,
            closed: branch.closed,
            termination: branch.termination,
            trivial_hits: branch.trivial_hits.clone(),
            trivial_hits_omega: branch.trivial_hits.iter().map(|l| (1.0 - l) / 2.0).collect(),
            ds0: branch.ds0,
            points: branch
                .points
                .iter()
                .map(|p| SidecarPoint {
                    lambda: p.lambda,
                    omega: p.omega,
                    t: p.t,
                    arclength: p.arclength,
                    residual_sup: p.residual_sup,
                    outer: p.coeffs.iter().step_by(2).copied().collect(),
                    inner: p.coeffs.iter().skip(1).step_by(2).copied().collect(),
                })
                .collect(),
        }
    }
}

pub fn branch_sidecar_json(branch: &Branch) -> String {
    serde_json::to_string_pretty(&BranchSidecar::from_branch(branch)).expect("sidecar serializes") + "\n"
}

/// `<stem>.csv` and `<stem>.json`; dots already in the stem are kept.
pub fn branch_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let with = |ext: &str| {
        let mut s = stem.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".csv"), with(".json"))
}

pub fn write_branch(stem: &Path, branch: &Branch) -> Result<()> {
    let (csv, json) = branch_paths(stem);
    std::fs::write(csv, branch_csv(branch))?;
    std::fs::write(json, branch_sidecar_json(branch))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuation::BranchPoint;

    fn sample_state() -> PatchState {
        PatchState::from_interleaved(4, 0.63, 0.7123456789012345, &[-0.0123, 0.1 / 3.0, 1e-17, -2.5e-5]).unwrap()
    }

    #[test]
    fn state_round_trip_is_exact() {
        let s = sample_state();
        let back = state_from_json(&state_to_json(&s)).unwrap();
        assert_eq!(back, s);
        for (a, b) in back.interleaved().iter().zip(s.interleaved()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn malformed_and_invalid_are_distinguished() {
        assert!(matches!(state_from_json("{ not json"), Err(VStateError::Malformed(_))));
        let mut f = StateFile::from_state(&sample_state());
        f.b = 1.5;
        let text = serde_json::to_string(&f).unwrap();
        assert!(matches!(state_from_json(&text), Err(VStateError::InvalidState(_))));
        f.b = 0.63;
        f.inner.pop();
        let text = serde_json::to_string(&f).unwrap();
        assert!(matches!(state_from_json(&text), Err(VStateError::InvalidState(_))));
    }

    #[test]
    fn csv_layout() {
        let s = sample_state();
        let branch = Branch {
            m: 4,
            b: 0.63,
            origin_sign: Sign::Plus,
            modes: 2,
            nodes: 32,
            points: vec![BranchPoint::from_state(&s, 1e-13, 0.0)],
            closed: false,
            trivial_hits: vec![0.73],
            termination: Termination::MaxSteps,
            ds0: 1e-3,
            v_norm: 1.0,
        };
        let csv = branch_csv(&branch);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 7);
        assert_eq!(fields[1].parse::<f64>().unwrap().to_bits(), s.lambda.to_bits());
        assert!(!csv.contains('\r') && !lines[1].ends_with(','));
        let sidecar: BranchSidecar = serde_json::from_str(&branch_sidecar_json(&branch)).unwrap();
        assert_eq!(sidecar.points[0].inner, s.inner.coeffs());
        assert_eq!(sidecar.n, 2);
    }
}
