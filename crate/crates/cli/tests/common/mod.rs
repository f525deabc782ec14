#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// Runs the binary with `args`, substituting `@name` by the path of a bundled model.
pub fn run(args: &[&str]) -> Output {
    let resolved: Vec<String> = args
        .iter()
        .map(|a| match a.strip_prefix('@') {
            Some(name) => models().join(format!("{name}.json")).display().to_string(),
            None => a.to_string(),
        })
        .collect();
    Command::new(env!("CARGO_BIN_EXE_thermoformal"))
        .args(&resolved)
        .env_remove("THERMOFORMAL_LOG")
        .output()
        .expect("binary runs")
}

pub fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

/// The envelope with its wall time removed.
pub fn without_wall_time(mut v: Value) -> Value {
    if let Value::Object(map) = &mut v {
        map.remove("wall_time");
    }
    v
}

/// Raw stdout with the `wall_time` line blanked, for byte comparisons.
pub fn mask_wall_time(stdout: &[u8]) -> String {
    String::from_utf8_lossy(stdout)
        .lines()
        .map(|l| {
            if l.trim_start().starts_with("\"wall_time\"") {
                "  \"wall_time\": _"
            } else {
                l
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub struct Case {
    pub name: &'static str,
    pub args: &'static [&'static str],
}

/// One invocation per documented command, plus a few flag variants.
pub const CASES: &[Case] = &[
    Case {
        name: "spectral_f2_zero",
        args: &["spectral", "--model", "@f2_zero"],
    },
    Case {
        name: "spectral_depth3",
        args: &["spectral", "--model", "@depth3_table", "--tol", "1e-11"],
    },
    Case {
        name: "pressure_gm_zero",
        args: &["pressure", "--model", "@gm_zero", "--oracle"],
    },
    Case {
        name: "gibbs_b211",
        args: &["gibbs", "--model", "@b211", "--depth", "3"],
    },
    Case {
        name: "gibbs_depth3",
        args: &["gibbs", "--model", "@depth3_table"],
    },
    Case {
        name: "entropy_gm_zero",
        args: &["entropy", "--model", "@gm_zero"],
    },
    Case {
        name: "entropy_b211_variational",
        args: &[
            "entropy",
            "--model",
            "@b211",
            "--method",
            "variational",
            "--depth",
            "1",
            "--oracle",
        ],
    },
    Case {
        name: "minmax_f2_zero",
        args: &["minmax", "--model", "@f2_zero", "--restarts", "4", "--seed", "7"],
    },
    Case {
        name: "minmax_depth3",
        args: &["minmax", "--model", "@depth3_table", "--restarts", "3", "--oracle"],
    },
    Case {
        name: "bowen_root_f2_H3",
        args: &["bowen-root", "--model", "@f2_H3", "--tol", "1e-10"],
    },
    Case {
        name: "kms_measure_b211_kms",
        args: &["kms-measure", "--model", "@b211_kms"],
    },
    Case {
        name: "kms_measure_depth3",
        args: &["kms-measure", "--model", "@depth3_table", "--depth", "3"],
    },
    Case {
        name: "kms_check_b211_kms",
        args: &["kms-check", "--model", "@b211_kms", "--n", "3"],
    },
    Case {
        name: "convergence_gm_zero",
        args: &["convergence", "--model", "@gm_zero", "--n", "20"],
    },
];
