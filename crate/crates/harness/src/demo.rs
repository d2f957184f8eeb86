//! Built-in instances: the rotation ball construction in d = 3, the three
//! moving points in the plane and the even-dimensional parity family.

use std::path::{Path, PathBuf};

use masspart_core::kinetic::{fig5_instance, parity_counterexample, MovingFamily};
use serde::Serialize;

use crate::generate;
use crate::instance::{Instance, MovingFamilySpec, MovingPointSpec, Problem, RunConfig, INSTANCE_VERSION};
use crate::plot::render_plot;
use crate::HarnessError;

/// Blur of the three moving points.
pub const FIG5_SIGMA: f64 = 0.05;
/// Dimension of the parity instance.
pub const PARITY_D: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetRow {
    pub t: f64,
    pub closed: f64,
    pub direct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Demo {
    pub rotation: Instance,
    pub fig5: Instance,
    pub parity: Instance,
    pub det_table: Vec<DetRow>,
}

pub fn moving_spec(f: &MovingFamily) -> MovingFamilySpec {
    MovingFamilySpec {
        points: f
            .members()
            .iter()
            .map(|m| MovingPointSpec {
                position: m.position.as_slice().to_vec(),
                velocity: m.velocity.as_slice().to_vec(),
                weight: m.weight,
            })
            .collect(),
        sigma: f.sigma(),
    }
}

fn dynamic_instance(name: &str, families: &[MovingFamily]) -> Instance {
    Instance {
        version: INSTANCE_VERSION,
        name: Some(name.into()),
        problem: Problem::Dynamic { families: families.iter().map(moving_spec).collect() },
        config: RunConfig::default(),
    }
}

/// The three moving points as an instance.
pub fn fig5() -> Result<Instance, HarnessError> {
    Ok(dynamic_instance("three moving points, never collinear", &fig5_instance(FIG5_SIGMA)?))
}

pub fn demo() -> Result<Demo, HarnessError> {
    let mut rotation = generate::rotation(3, 3, 2, 8, Some(0.1));
    rotation.name = Some("rotation d=3 k=2: unit balls at 0 and e_3 on S_2".into());
    let (families, checker) = parity_counterexample(PARITY_D)?;
    let parity = dynamic_instance("single moving points (e_i, e_{i+1} - e_i), d = 4", &families);
    let det_table = (-4..=8)
        .map(|i| {
            let t = 0.25 * i as f64;
            let (closed, direct) = checker.check(t);
            DetRow { t, closed, direct }
        })
        .collect();
    Ok(Demo { rotation, fig5: fig5()?, parity, det_table })
}

fn write(path: PathBuf, text: String) -> Result<PathBuf, HarnessError> {
    std::fs::write(&path, text).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Writes the demo instances, the determinant table and the moving-points plot into `dir`.
pub fn write_demo(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    let d = demo()?;
    let mut out = vec![
        write(dir.join("rotation_d3k2.json"), d.rotation.to_json())?,
        write(dir.join("fig5.json"), d.fig5.to_json())?,
        write(dir.join("parity_d4.json"), d.parity.to_json())?,
        write(dir.join("parity_det.json"), serde_json::to_string_pretty(&d.det_table).expect("table serializes") + "\n")?,
    ];
    let svg = dir.join("fig5.svg");
    render_plot(&d.fig5, None, Some("positions at t = 0, 0.5, 1; segments show one time unit of motion"), &svg)?;
    out.push(svg);
    Ok(out)
}
