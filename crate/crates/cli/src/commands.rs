use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

use thmpc::harness::{append_csv, sweep as run_sweep, write_csv, RunRecord, RunSpec};
use thmpc::problem::{unit_random_vector, SURROGATE};
use thmpc::sparse::{read_matrix_market, write_matrix_market};
use thmpc::{
    generate, BlockLayout, ContactState, CsrMatrix, GeneratedProblem, KrylovConfig, MaterialParams, PreconditionerConfig,
    ProblemSpec, PtVariant, SolveReport,
};

use crate::args::{GenArgs, ProblemArgs, SolveArgs, SolverArgs, SweepArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] thmpc::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub enum Outcome {
    Converged,
    NotConverged,
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn with_path(path: &Path, e: thmpc::Error) -> CliError {
    match e {
        thmpc::Error::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        e => CliError::Usage(format!("{}: {e}", path.display())),
    }
}

fn problem_spec(p: &ProblemArgs) -> Result<ProblemSpec> {
    let mut spec = ProblemSpec::with_fractions(p.dim, p.refine, p.states.stick, p.states.slide, p.seed)?;
    spec.peclet_scale = p.peclet;
    spec.validate()?;
    Ok(spec)
}

fn configs(pt: PtVariant, s: &SolverArgs) -> (PreconditionerConfig, KrylovConfig) {
    let base = if s.exact_mode {
        PreconditionerConfig::exact()
    } else {
        PreconditionerConfig::with_pt(pt)
    };
    let precond = PreconditionerConfig {
        amg_threshold: s.amg_theta,
        thermal_stab: s.thermal_stab,
        ..base
    };
    let krylov = KrylovConfig {
        restart: s.restart,
        max_iters: s.max_iters,
        rtol: s.rtol,
        flexible: s.flexible,
        ..KrylovConfig::default()
    };
    (precond, krylov)
}

fn format_vector(v: &[f64]) -> String {
    let mut s = String::with_capacity(v.len() * 24);
    for x in v {
        s.push_str(&format!("{x}\n"));
    }
    s
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

fn read_vector(path: &Path, n: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let v = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{}:{}: not a number: {l:?}", path.display(), i + 1)))
        })
        .collect::<Result<Vec<f64>>>()?;
    if v.len() != n {
        return Err(CliError::Usage(format!(
            "{}: expected {n} values, found {}",
            path.display(),
            v.len()
        )));
    }
    Ok(v)
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn gen(a: &GenArgs) -> Result<Outcome> {
    let p = generate(&problem_spec(&a.problem)?)?;
    let mtx = with_ext(&a.out, "mtx");
    write_matrix_market(&p.matrix, &mtx).map_err(|e| with_path(&mtx, e))?;
    let layout = with_ext(&a.out, "json");
    p.layout.write(&layout).map_err(|e| with_path(&layout, e))?;
    write_file(&with_ext(&a.out, "txt"), &format_vector(&p.rhs))?;
    let count = |s| p.layout.states().iter().filter(|&&x| x == s).count();
    println!(
        "n={} nnz={} stick={} slide={} open={} -> {}.{{mtx,json,txt}}",
        p.layout.n(),
        p.matrix.nnz(),
        count(ContactState::Stick),
        count(ContactState::Slide),
        count(ContactState::Open),
        a.out.display()
    );
    Ok(Outcome::Converged)
}

struct Loaded {
    matrix: CsrMatrix,
    layout: BlockLayout,
    rhs: Vec<f64>,
    material: MaterialParams,
    generated: Option<GeneratedProblem>,
}

fn load(a: &SolveArgs) -> Result<Loaded> {
    match (&a.matrix, &a.layout) {
        (Some(mp), Some(lp)) => {
            let layout = BlockLayout::read(lp).map_err(|e| with_path(lp, e))?;
            let matrix = read_matrix_market(mp).map_err(|e| with_path(mp, e))?;
            if matrix.n_rows() != layout.n() || matrix.n_cols() != layout.n() {
                return Err(CliError::Usage(format!(
                    "matrix is {}x{} but the layout describes {} unknowns",
                    matrix.n_rows(),
                    matrix.n_cols(),
                    layout.n()
                )));
            }
            let rhs = match &a.rhs {
                Some(rp) => read_vector(rp, layout.n())?,
                None => matrix.spmv(&unit_random_vector(layout.n(), a.problem.seed))?,
            };
            let material = MaterialParams::with_dim(layout.dim());
            Ok(Loaded {
                matrix,
                layout,
                rhs,
                material,
                generated: None,
            })
        }
        (None, None) => {
            let p = generate(&problem_spec(&a.problem)?)?;
            Ok(Loaded {
                matrix: p.matrix.clone(),
                layout: p.layout.clone(),
                rhs: p.rhs.clone(),
                material: p.spec.material.clone(),
                generated: Some(p),
            })
        }
        _ => Err(CliError::Usage("--matrix and --layout must be given together".into())),
    }
}

fn print_summary(rec: &RunRecord) {
    println!(
        "variant={} n={} iterations={} converged={} final_rres={}",
        rec.variant,
        rec.n,
        rec.iterations.map(|i| i.to_string()).unwrap_or_else(|| "-".into()),
        rec.converged,
        rec.final_rres.map(|r| format!("{r:.3e}")).unwrap_or_else(|| "-".into()),
    );
}

pub fn solve(a: &SolveArgs) -> Result<Outcome> {
    let input = load(a)?;
    let (precond, krylov) = configs(a.pt, &a.solver);
    let (x, report): (Vec<f64>, SolveReport) =
        thmpc::solve(&input.matrix, &input.layout, &input.material, &precond, &krylov, &input.rhs)?;
    let problem = input
        .generated
        .as_ref()
        .map(|g| (g.spec.dim(), g.spec.refinement, g.spec.seed, g.spec.peclet_scale));
    let converged = report.converged;
    let result = Ok(report);
    let mut rec = RunRecord::from_report(
        &precond,
        &krylov,
        input.layout.n(),
        input.matrix.nnz(),
        input.layout.states(),
        problem,
        &result,
    );
    if !a.solver.timings {
        rec = rec.without_timings();
    }
    let report = result.expect("solve succeeded");

    if let Some(path) = &a.out {
        let mut doc = json!({ "record": rec, "report": report });
        if let Some(g) = &input.generated {
            doc["problem"] = json!({ "spec": g.spec, "generator_constants": SURROGATE });
        }
        let text = serde_json::to_string_pretty(&doc).map_err(thmpc::Error::from)?;
        write_file(path, &(text + "\n"))?;
    }
    if let Some(path) = &a.solution {
        write_file(path, &format_vector(&x))?;
    }
    if let Some(path) = &a.csv {
        append_csv(std::slice::from_ref(&rec), path).map_err(|e| with_path(path, e))?;
    }
    print_summary(&rec);
    Ok(if converged { Outcome::Converged } else { Outcome::NotConverged })
}

pub fn sweep(a: &SweepArgs) -> Result<Outcome> {
    let values: Vec<f64> = a
        .values
        .iter()
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().map_err(|_| CliError::Usage(format!("bad sweep value {v:?}"))))
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(CliError::Usage("--values needs at least one axis value".into()));
    }
    if a.pt.is_empty() {
        return Err(CliError::Usage("--pt needs at least one variant".into()));
    }
    let (precond, krylov) = configs(a.pt[0], &a.solver);
    let base = RunSpec {
        dim: a.problem.dim,
        refine: a.problem.refine,
        states: a.problem.states,
        peclet: a.problem.peclet,
        seed: a.problem.seed,
        precond,
        krylov,
    };
    // reject an invalid base before any work
    problem_spec(&a.problem)?;
    let variants: Vec<PtVariant> = if a.solver.exact_mode { vec![PtVariant::ExactDense] } else { a.pt.clone() };
    let mut rows = run_sweep(&base, a.axis, &values, &variants)?;
    if !a.solver.timings {
        rows = rows.into_iter().map(RunRecord::without_timings).collect();
    }
    match &a.csv {
        Some(path) => {
            let f = fs::File::create(path).map_err(io_err(path))?;
            write_csv(&rows, f, true).map_err(|e| with_path(path, e))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv(&rows, &mut lock, true)?;
            lock.flush().map_err(io_err(Path::new("<stdout>")))?;
        }
    }
    for (vi, v) in variants.iter().enumerate() {
        let ratios: Vec<String> = rows
            .iter()
            .skip(vi)
            .step_by(variants.len())
            .map(|r| r.growth_ratio.map(|g| format!("{g:.2}")).unwrap_or_else(|| "-".into()))
            .collect();
        eprintln!("{v} {} growth: {}", a.axis, ratios.join(" "));
    }
    let all = rows.iter().all(|r| r.converged);
    Ok(if all { Outcome::Converged } else { Outcome::NotConverged })
}
