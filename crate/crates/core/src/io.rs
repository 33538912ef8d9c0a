//! Run configuration, CSV and legacy VTK output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{FemError, Result};
use crate::manufactured::ManufacturedCase;
use crate::mesh::FineMesh;
use crate::params::{peak_index, PowerLawParams};
use crate::solver::{SolutionState, SolverConfig};
use crate::stabilisation::{lift, lifted_divergence};
use crate::verify::{run_convergence_study, run_invariant_suite, solve_level};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Convergence,
    Verify,
}

impl FromStr for Command {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "solve" => Ok(Command::Solve),
            "convergence" => Ok(Command::Convergence),
            "verify" => Ok(Command::Verify),
            other => Err(FemError::Config(format!(
                "unknown command '{other}' (expected solve, convergence or verify)"
            ))),
        }
    }
}

/// Everything a run needs. Built from a flat `key = value` file, then
/// overridden by command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub r: f64,
    pub d: usize,
    /// Macro cells per side of the coarsest mesh.
    pub n: usize,
    pub levels: usize,
    pub case: String,
    pub tolerance: f64,
    pub linear_tolerance: f64,
    pub max_iterations: usize,
    /// `None` picks the default for `r`.
    pub damping: Option<f64>,
    /// `None` picks the default for `r`.
    pub epsilon_reg: Option<f64>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::Solve,
            r: 2.0,
            d: 2,
            n: 2,
            levels: 3,
            case: "M1".into(),
            tolerance: 1e-10,
            linear_tolerance: 1e-10,
            max_iterations: 200,
            damping: None,
            epsilon_reg: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Keys accepted in a configuration file.
pub const CONFIG_KEYS: &[&str] = &[
    "r",
    "d",
    "n",
    "levels",
    "case",
    "tolerance",
    "linear_tolerance",
    "max_iterations",
    "damping",
    "epsilon_reg",
    "out",
];

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| FemError::Parse {
        line,
        message: format!("invalid value '{value}' for '{key}'"),
    })
}

impl RunConfig {
    /// Reads `key = value` lines on top of the defaults. Blank lines and
    /// lines starting with `#` are ignored; unknown keys are errors.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(FemError::Parse {
                    line,
                    message: format!("expected 'key = value', found '{content}'"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            cfg.set(line, key, value)?;
        }
        Ok(cfg)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| FemError::io(path, e))?;
        Self::parse_str(&text)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        match key {
            "r" => self.r = parse_value(line, key, value)?,
            "d" => self.d = parse_value(line, key, value)?,
            "n" => self.n = parse_value(line, key, value)?,
            "levels" => self.levels = parse_value(line, key, value)?,
            "case" => self.case = value.to_string(),
            "tolerance" => self.tolerance = parse_value(line, key, value)?,
            "linear_tolerance" => self.linear_tolerance = parse_value(line, key, value)?,
            "max_iterations" => self.max_iterations = parse_value(line, key, value)?,
            "damping" => self.damping = Some(parse_value(line, key, value)?),
            "epsilon_reg" => self.epsilon_reg = Some(parse_value(line, key, value)?),
            "out" => self.out_dir = PathBuf::from(value),
            other => {
                return Err(FemError::Parse {
                    line,
                    message: format!(
                        "unknown key '{other}' (known keys: {})",
                        CONFIG_KEYS.join(", ")
                    ),
                })
            }
        }
        Ok(())
    }

    /// Checks every field against the requirements of the modules it feeds.
    pub fn validate(&self) -> Result<()> {
        if self.d != 2 {
            return Err(FemError::Config(format!(
                "only d = 2 meshes are supported (got d = {})",
                self.d
            )));
        }
        self.params()?;
        if self.n == 0 {
            return Err(FemError::Config("n must be at least 1".into()));
        }
        if self.levels == 0 {
            return Err(FemError::Config("levels must be at least 1".into()));
        }
        if self.command == Command::Convergence && self.levels < 3 {
            return Err(FemError::Config(format!(
                "a convergence study needs at least 3 levels (got {})",
                self.levels
            )));
        }
        ManufacturedCase::by_name(&self.case)?;
        self.solver_config().validate()
    }

    pub fn params(&self) -> Result<PowerLawParams> {
        match self.epsilon_reg {
            Some(eps) => PowerLawParams::with_epsilon(self.r, self.d, eps),
            None => PowerLawParams::new(self.r, self.d),
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let defaults = SolverConfig::for_exponent(self.r);
        SolverConfig {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            damping: self.damping.unwrap_or(defaults.damping),
            epsilon_reg: self.epsilon_reg,
            linear_tolerance: self.linear_tolerance,
        }
    }
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_text(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| FemError::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| FemError::io(path, e))
}

/// Legacy VTK 2.0 ASCII unstructured grid with the velocity at the nodes
/// and the pressure and `div L(u_h, p_h)` on the cells.
pub fn vtk_string(mesh: &FineMesh, state: &SolutionState, params: &PowerLawParams) -> String {
    let div = lifted_divergence(mesh, &lift(mesh, &state.u, &state.p, params));
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 2.0\n");
    out.push_str("powerlaw-fem solution\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.n_nodes());
    for p in &mesh.nodes {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p[0], p[1], 0.0);
    }
    let _ = writeln!(out, "CELLS {} {}", mesh.n_elements(), 4 * mesh.n_elements());
    for t in &mesh.elements {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {}", mesh.n_elements());
    for _ in &mesh.elements {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "POINT_DATA {}", mesh.n_nodes());
    out.push_str("VECTORS velocity double\n");
    for v in &state.u.values {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", v[0], v[1], 0.0);
    }
    let _ = writeln!(out, "CELL_DATA {}", mesh.n_elements());
    out.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    for p in &state.p.values {
        let _ = writeln!(out, "{p:.16e}");
    }
    out.push_str("SCALARS div_lifted double 1\nLOOKUP_TABLE default\n");
    for d in &div.values {
        let _ = writeln!(out, "{d:.16e}");
    }
    out
}

pub fn write_vtk(
    mesh: &FineMesh,
    state: &SolutionState,
    params: &PowerLawParams,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_text(path, &vtk_string(mesh, state, params))
}

/// Runs the configured command, writing files into `cfg.out_dir` and a
/// human-readable summary into `log`. Returns whether every check passed
/// (for `solve`: whether the iteration converged).
pub fn run(cfg: &RunConfig, log: &mut dyn std::io::Write) -> Result<bool> {
    cfg.validate()?;
    let params = cfg.params()?;
    let case = ManufacturedCase::by_name(&cfg.case)?;
    let config = cfg.solver_config();
    let out = &cfg.out_dir;
    let say = |log: &mut dyn std::io::Write, text: String| -> Result<()> {
        writeln!(log, "{text}").map_err(|e| FemError::io("<log>", e))
    };
    match cfg.command {
        Command::Solve => {
            let level = cfg.levels - 1;
            match solve_level(&case, &params, cfg.n, level, &config) {
                Ok((mesh, state, data)) => {
                    write_text(out.join("iterations.csv"), &state.log_csv())?;
                    write_vtk(
                        &mesh,
                        &state,
                        &config.effective_params(&params)?,
                        out.join("solution.vtk"),
                    )?;
                    say(
                        log,
                        format!(
                            "converged in {} iterations (residual {:.3e}) on {} elements",
                            data.iterations,
                            data.final_residual,
                            mesh.n_elements()
                        ),
                    )?;
                    if let Some(e) = data.errors {
                        say(log, format!(
                            "errors: |u-u_h|_1,r = {:.6e}, ||u-u_h||_0,2r~ = {:.6e}, ||p-p_h||_0,r~ = {:.6e}",
                            e.velocity_w1r, e.velocity_l2rt, e.pressure_lrt
                        ))?;
                    }
                    say(log, format!("max |div L| = {:.3e}", data.max_div_l))?;
                    Ok(true)
                }
                Err(FemError::NotConverged {
                    iterations,
                    last_residual,
                    tolerance,
                    history,
                }) => {
                    let csv: String = std::iter::once("iter,residual".to_string())
                        .chain(
                            history
                                .iter()
                                .enumerate()
                                .map(|(i, r)| format!("{},{r:.16e}", i + 1)),
                        )
                        .map(|l| l + "\n")
                        .collect();
                    write_text(out.join("iterations.csv"), &csv)?;
                    say(log, format!(
                        "not converged after {iterations} iterations: residual {last_residual:.3e} > {tolerance:.3e}"
                    ))?;
                    Ok(false)
                }
                Err(e) => Err(e),
            }
        }
        Command::Convergence => {
            let study = run_convergence_study(&case, &params, cfg.n, cfg.levels, &config)?;
            let csv = study.table.to_csv();
            write_text(out.join("convergence.csv"), &csv)?;
            say(log, csv.trim_end().to_string())?;
            let solved = study.table.rows.iter().all(|r| r.failure.is_none());
            // below 3d/(d+2) the discrete solution may not be unique, so growth is reported only
            let monotone_required = params.r >= peak_index(params.d);
            let monotone = study.table.errors_non_increasing();
            say(
                log,
                format!(
                    "errors non-increasing: {}{}",
                    if monotone { "yes" } else { "no" },
                    if monotone_required {
                        ""
                    } else {
                        " (not enforced for this r)"
                    }
                ),
            )?;
            Ok(solved && (monotone || !monotone_required))
        }
        Command::Verify => {
            let checks = run_invariant_suite(&case, &params, cfg.n, cfg.levels, &config)?;
            let mut csv = String::from("check,value,threshold,passed,detail\n");
            for c in &checks {
                say(log, c.line())?;
                let _ = writeln!(
                    csv,
                    "{},{:.16e},{:.16e},{},{}",
                    c.name.replace(',', ";"),
                    c.value,
                    c.threshold,
                    c.passed,
                    c.detail.replace(',', ";")
                );
            }
            write_text(out.join("checks.csv"), &csv)?;
            let passed = checks.iter().filter(|c| c.passed).count();
            say(log, format!("{passed} of {} checks passed", checks.len()))?;
            Ok(passed == checks.len())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{red_refine, MacroMesh};

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::parse_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(
            (cfg.r, cfg.n, cfg.levels, cfg.case.as_str()),
            (2.0, 2, 3, "M1")
        );
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn keys_comments_and_errors() {
        let cfg = RunConfig::parse_str(
            "# comment\n r = 1.5\n\nlevels=4\ncase = pressure-only\nepsilon_reg = 1e-6\n",
        )
        .unwrap();
        assert_eq!(cfg.r, 1.5);
        assert_eq!(cfg.levels, 4);
        assert_eq!(cfg.case, "pressure-only");
        assert_eq!(cfg.params().unwrap().epsilon_reg, 1e-6);
        match RunConfig::parse_str("r = 2\nfoo = 1\n") {
            Err(FemError::Parse { line: 2, message }) => {
                assert!(message.contains("unknown key 'foo'"))
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            RunConfig::parse_str("r 2"),
            Err(FemError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::parse_str("n = two"),
            Err(FemError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn inadmissible_exponent_reports_the_bound() {
        let cfg = RunConfig::parse_str("r = 1.0").unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("r must exceed 2d/(d+2) = 1"), "{err}");
    }

    #[test]
    fn other_validation() {
        let cfg = RunConfig {
            command: Command::Convergence,
            levels: 2,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig {
            d: 3,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig {
            damping: Some(1.5),
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig {
            case: "nope".into(),
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(
            RunConfig {
                r: 1.5,
                ..RunConfig::default()
            }
            .solver_config()
            .damping,
            0.7
        );
    }

    #[test]
    fn vtk_counts_and_zero_data() {
        let mesh = red_refine(&MacroMesh::unit_square(1).unwrap()).unwrap();
        let params = PowerLawParams::new(2.0, 2).unwrap();
        let text = vtk_string(&mesh, &SolutionState::zero(&mesh), &params);
        assert!(text.starts_with("# vtk DataFile Version 2.0\n"));
        assert!(text.contains("POINTS 9 double\n"));
        assert!(text.contains("CELLS 8 32\n"));
        assert!(text.contains("CELL_TYPES 8\n"));
        let after = |tag: &str, count: usize| -> Vec<f64> {
            let start = text.find(tag).unwrap() + tag.len();
            text[start..]
                .split_whitespace()
                .take(count)
                .map(|t| t.parse().unwrap())
                .collect()
        };
        assert!(after("VECTORS velocity double\n", 27)
            .iter()
            .all(|&v| v == 0.0));
        assert!(
            after("SCALARS pressure double 1\nLOOKUP_TABLE default\n", 8)
                .iter()
                .all(|&v| v == 0.0)
        );
        assert!(
            after("SCALARS div_lifted double 1\nLOOKUP_TABLE default\n", 8)
                .iter()
                .all(|&v| v == 0.0)
        );
    }

    #[test]
    fn vtk_output_is_deterministic() {
        let mesh = red_refine(&MacroMesh::unit_square(2).unwrap()).unwrap();
        let params = PowerLawParams::new(2.0, 2).unwrap();
        let mut state = SolutionState::zero(&mesh);
        state.u =
            crate::spaces::P1VectorField::interpolate(&mesh, |x| [x[0].sin(), 1.0 / 3.0], true);
        assert_eq!(
            vtk_string(&mesh, &state, &params),
            vtk_string(&mesh, &state, &params)
        );
        // 17 significant digits
        assert!(vtk_string(&mesh, &state, &params).contains("3.3333333333333331e-1"));
    }
}
