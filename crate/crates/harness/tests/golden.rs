//! Fixture instances and their reports, one per subcommand.
//!
//! `UPDATE_GOLDEN=1 cargo test -p masspart --test golden` rewrites the files.

use std::path::{Path, PathBuf};

use masspart::cli::run_cli;
use masspart::demo;
use masspart::generate;
use masspart::instance::{AssignmentSpec, Instance, LevelSpec, Problem, RunConfig, INSTANCE_VERSION};
use masspart::report::Report;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn updating() -> bool {
    std::env::var_os("UPDATE_GOLDEN").is_some()
}

fn cloud(points: &[[f64; 2]], dim: usize) -> AssignmentSpec {
    AssignmentSpec::Cloud { dim, points: points.iter().map(|p| p.to_vec()).collect(), weights: None, sigma: None }
}

fn fairy_symmetric() -> Instance {
    let a = [[1.0, 0.5], [-1.0, -0.5], [0.3, -1.0], [-0.3, 1.0]];
    let b = [[2.0, 0.0], [-2.0, 0.0], [0.0, 0.7], [0.0, -0.7], [0.0, 0.0]];
    Instance {
        version: INSTANCE_VERSION,
        name: Some("centrally symmetric clouds".into()),
        problem: Problem::Fairy {
            d: 2,
            k: 1,
            pi: vec![1, 0],
            levels: vec![
                LevelSpec { pivot: cloud(&a, 2), functionals: vec![cloud(&b, 2)] },
                LevelSpec { pivot: cloud(&b, 1), functionals: vec![] },
            ],
            overdetermined: false,
        },
        config: RunConfig::default(),
    }
}

fn hamsandwich() -> Instance {
    let mut r = generate::rng(11);
    let measures = (0..2).map(|_| generate::random_cloud(&mut r, 2, 2, 7, Some(0.1))).collect();
    Instance {
        version: INSTANCE_VERSION,
        name: Some("two blurred clouds in the plane".into()),
        problem: Problem::Hamsandwich { d: 2, measures },
        config: RunConfig::default(),
    }
}

fn lemma24() -> Instance {
    let ball = |c: [f64; 2], dim: usize| AssignmentSpec::ProjectedBall { dim, center: c.to_vec(), radius: 1.0 };
    Instance {
        version: INSTANCE_VERSION,
        name: Some("unit disks at 0, e_1, e_2: no line-and-point flag bisects all three".into()),
        problem: Problem::Fairy {
            d: 2,
            k: 1,
            pi: vec![0, 1],
            levels: vec![
                LevelSpec {
                    pivot: AssignmentSpec::BallSection { dim: 2, center: vec![0.0, 0.0], radius: 1.0 },
                    functionals: vec![],
                },
                LevelSpec { pivot: ball([0.0, 0.0], 1), functionals: vec![ball([1.0, 0.0], 1), ball([0.0, 1.0], 1)] },
            ],
            overdetermined: true,
        },
        config: RunConfig { grid_resolution: 200, ..RunConfig::default() },
    }
}

struct Case {
    /// Stem of the report and plot files.
    name: &'static str,
    /// Stem of the instance file.
    instance: &'static str,
    command: &'static str,
    extra: Vec<String>,
    exit: i32,
    plot: bool,
}

fn case(name: &'static str, command: &'static str, exit: i32) -> Case {
    Case { name, instance: name, command, extra: Vec::new(), exit, plot: false }
}

fn instances() -> Vec<(&'static str, Instance)> {
    let d = demo::demo().unwrap();
    vec![
        ("fairy_symmetric", fairy_symmetric()),
        ("hamsandwich_d2", hamsandwich()),
        ("rotation_d3k2", d.rotation),
        ("transversal_d3k2l1", generate::transversal(1, 3, 2, 1, 6, Some(0.1))),
        ("horizontal_d3", generate::horizontal(1, 3, 6, Some(0.1))),
        ("dynamic_d3", generate::dynamic(1, 3, 6, Some(0.1))),
        ("hline_d3", generate::translated_line(1, 3, 6, Some(0.1))),
        ("fig5", d.fig5),
        ("lemma24_d2", lemma24()),
    ]
}

fn cases() -> Vec<Case> {
    let rotation_report = fixture_dir().join("reports/rotation_d3k2.json").display().to_string();
    vec![
        Case { plot: true, ..case("fairy_symmetric", "fairy", 0) },
        Case { plot: true, ..case("hamsandwich_d2", "fairy", 0) },
        Case { plot: true, ..case("rotation_d3k2", "rotation", 0) },
        case("transversal_d3k2l1", "transversal", 0),
        case("horizontal_d3", "horizontal", 0),
        Case { extra: vec!["--resolution".into(), "24".into()], ..case("dynamic_d3", "dynamic", 0) },
        case("hline_d3", "hline", 0),
        Case { extra: vec!["--resolution".into(), "64".into()], plot: true, ..case("fig5", "dynamic", 2) },
        case("lemma24_d2", "oracle", 0),
        Case {
            name: "verify_rotation_d3k2",
            instance: "rotation_d3k2",
            command: "verify",
            extra: vec!["--solution".into(), rotation_report],
            exit: 0,
            plot: false,
        },
    ]
}

fn masked(text: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
    v["wall_time_ms"] = serde_json::Value::Null;
    v
}

fn check_or_write(path: &Path, text: &str) {
    if updating() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, text).unwrap();
    } else {
        let want = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(want, text, "{} differs", path.display());
    }
}

fn instances_match_fixtures() {
    for (name, inst) in instances() {
        check_or_write(&fixture_dir().join(format!("{name}.json")), &inst.to_json());
        assert_eq!(Instance::from_json(&inst.to_json()).unwrap(), inst);
    }
}

#[test]
fn fixtures_and_reports() {
    instances_match_fixtures();
    let tmp = tempfile::tempdir().unwrap();
    for c in cases() {
        let input = fixture_dir().join(format!("{}.json", c.instance));
        let out = tmp.path().join(format!("{}.report.json", c.name));
        let svg = tmp.path().join(format!("{}.svg", c.name));
        let mut argv = vec!["masspart".to_string(), c.command.into(), "--in".into(), input.display().to_string()];
        argv.extend(["--out".into(), out.display().to_string()]);
        if c.plot {
            argv.extend(["--plot".into(), svg.display().to_string()]);
        }
        argv.extend(c.extra.iter().cloned());
        assert_eq!(run_cli(&argv), c.exit, "{}", c.name);
        let text = std::fs::read_to_string(&out).unwrap();
        let golden = fixture_dir().join("reports").join(format!("{}.json", c.name));
        if updating() {
            check_or_write(&golden, &text);
        } else {
            let want = std::fs::read_to_string(&golden).unwrap();
            assert_eq!(masked(&want), masked(&text), "{} report differs", c.name);
        }
        Report::from_json(&text).unwrap();
        if c.plot {
            let got = std::fs::read_to_string(&svg).unwrap();
            check_or_write(&fixture_dir().join("plots").join(format!("{}.svg", c.name)), &got);
        }
    }
}
