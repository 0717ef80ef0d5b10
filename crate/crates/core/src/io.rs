//! CSV and JSON output helpers.
//!
//! Machine files carry floats at 17 significant digits so reruns are
//! byte-identical; header comment lines record the provenance (kind,
//! parameters, config hash).

use std::fmt::Write as _;
use std::path::Path;

use crate::branch::Branch;
use crate::error::Result;
use crate::integrate::{Frame, IntegratorConfig, RadialProfile};
use crate::model::Params;
use crate::phase::PhaseOrbit;

/// Serde adapter mapping infinite floats to the string "inf" (JSON numbers
/// cannot carry infinities).
pub mod float_maybe_inf {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("not a float: {other}"))),
            },
        }
    }
}

/// 17-significant-digit float formatting for machine files.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// FNV-1a hash of a canonical config serialization, printed in output
/// headers so a file can be traced back to its exact configuration.
pub fn config_hash(serialized: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in serialized.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

fn frame_name(kind: Frame) -> &'static str {
    match kind {
        Frame::ThetaOnSphere => "theta_on_sphere",
        Frame::RStereographic => "r_stereographic",
        Frame::RhoFlat => "rho_flat",
    }
}

/// Render a profile as CSV: comment header, then `x,value,derivative` rows.
pub fn profile_csv(profile: &RadialProfile, params: &Params, cfg: &IntegratorConfig, hash: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# kind: {}", frame_name(profile.kind));
    let _ = writeln!(out, "# N: {}, p: {}", params.n, fmt17(params.p));
    let _ = writeln!(
        out,
        "# rel_tol: {}, abs_tol: {}, theta_start: {}",
        fmt17(cfg.rel_tol),
        fmt17(cfg.abs_tol),
        fmt17(cfg.theta_start)
    );
    let _ = writeln!(out, "# config_hash: {hash}");
    if let Some(z) = profile.first_zero {
        let _ = writeln!(out, "# first_zero: {}", fmt17(z));
    }
    let _ = writeln!(out, "x,value,derivative");
    for i in 0..profile.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt17(profile.grid[i]),
            fmt17(profile.value[i]),
            fmt17(profile.derivative[i])
        );
    }
    out
}

/// Render a branch as CSV with columns
/// `Gamma,gamma,Theta,R,slope_sign,w_end`.
pub fn branch_csv(branch: &Branch, hash: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# N: {}, p: {}", branch.params.n, fmt17(branch.params.p));
    let _ = writeln!(out, "# config_hash: {hash}");
    let _ = writeln!(out, "Gamma,gamma,Theta,R,slope_sign,w_end");
    for pt in &branch.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt17(pt.gamma_sphere),
            fmt17(pt.gamma_stereo),
            fmt17(pt.theta),
            fmt17(pt.r),
            pt.slope_sign,
            fmt17(pt.w_end)
        );
    }
    out
}

/// Render a phase orbit as CSV with columns `t,y,z,J[,E]`.
pub fn orbit_csv(orbit: &PhaseOrbit, params: &Params, hash: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# N: {}, p: {}", params.n, fmt17(params.p));
    let _ = writeln!(out, "# config_hash: {hash}");
    let with_e = orbit.e_trace.is_some();
    let _ = writeln!(out, "{}", if with_e { "t,y,z,J,E" } else { "t,y,z,J" });
    for i in 0..orbit.len() {
        if with_e {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt17(orbit.t[i]),
                fmt17(orbit.y[i]),
                fmt17(orbit.z[i]),
                fmt17(orbit.j_trace[i]),
                fmt17(orbit.e_trace.as_ref().unwrap()[i])
            );
        } else {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt17(orbit.t[i]),
                fmt17(orbit.y[i]),
                fmt17(orbit.z[i]),
                fmt17(orbit.j_trace[i])
            );
        }
    }
    out
}

/// Write a string to a file, creating parent directories as needed.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}
