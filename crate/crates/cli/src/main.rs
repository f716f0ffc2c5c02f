//! `fraceig` command-line driver: eigenvalue computation, Dirichlet-set
//! optimization, and the decay / rate / sweep / surround experiments, with
//! CSV outputs and a manifest echoing the resolved configuration.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fraceig::asympt::{s_sweep, SweepConfig};
use fraceig::eigensolve::{first_eigenpair, first_eigenpair_with_restarts, SolveOpts};
use fraceig::geometry::{build_mesh, fattened_annulus, translated_ball, Mesh, Params, SetMask};
use fraceig::kernel::{assemble_kernel_with, KernelOpts, Potential};
use fraceig::shapeopt::{
    alternating_minimize, decay_experiment, maximize_heuristic, separated_rate_experiment,
    surround_diagnostic, OptOpts, OptResult,
};

use config::{Config, DirichletSpec, PotentialSpec, RawConfig};

#[derive(Parser)]
#[command(
    name = "fraceig",
    about = "First eigenvalue of the regional fractional p-Laplacian with \
             optimized exterior Dirichlet sets",
    version
)]
struct Cli {
    /// configuration file (flat key = value with [section] headers)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory for CSV files and the manifest
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// rayon worker threads (0 = library default)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// seed for randomized restarts
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalue for the configured Dirichlet set
    Eig,
    /// Alternating minimization over sets of measure alpha
    Minimize,
    /// Heuristic maximization over sets of measure alpha
    Maximize,
    /// Eigenvalue decay for balls translated along e_1
    Decay,
    /// lambda / (1 - s) across s for the configured (separated) set
    Rate,
    /// Sweep of the constrained eigenvalues as s -> 1
    Sweep,
    /// Mask measure near the configured points
    Surround,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<(), String> {
    let config_path = cli.config.as_ref().ok_or("--config is required")?;
    let out_dir = cli.out.as_ref().ok_or("--out is required")?;
    let raw = RawConfig::load(config_path).map_err(|e| e.to_string())?;
    let mut cfg = Config::resolve(&raw).map_err(|e| e.to_string())?;
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    std::fs::create_dir_all(out_dir).map_err(|e| e.to_string())?;

    let command_name = match cli.command {
        Command::Eig => "eig",
        Command::Minimize => "minimize",
        Command::Maximize => "maximize",
        Command::Decay => "decay",
        Command::Rate => "rate",
        Command::Sweep => "sweep",
        Command::Surround => "surround",
    };
    write_manifest(out_dir, command_name, &cfg)?;

    match cli.command {
        Command::Eig => cmd_eig(&cfg, out_dir),
        Command::Minimize => cmd_optimize(&cfg, out_dir, false),
        Command::Maximize => cmd_optimize(&cfg, out_dir, true),
        Command::Decay => cmd_decay(&cfg, out_dir),
        Command::Rate => cmd_rate(&cfg, out_dir),
        Command::Sweep => cmd_sweep(&cfg, out_dir),
        Command::Surround => cmd_surround(&cfg, out_dir),
    }
    .map_err(|e| e.to_string())
}

// ---------------- shared plumbing ----------------

fn params(cfg: &Config) -> Params {
    Params {
        n: cfg.n,
        s: cfg.s,
        p: cfg.p,
        alpha: cfg.alpha,
        r: cfg.r,
    }
}

fn opt_opts(cfg: &Config) -> OptOpts {
    OptOpts {
        solve: SolveOpts {
            tol: cfg.tol,
            max_iter: cfg.max_iter,
        },
        kernel: KernelOpts {
            grading_depth: cfg.grading_depth,
            dof_cap: cfg.dof_cap,
            ..KernelOpts::default()
        },
        max_outer: cfg.max_outer,
        tol: cfg.tol,
    }
}

fn build(cfg: &Config) -> fraceig::Result<Mesh> {
    build_mesh(&cfg.domain, &params(cfg), cfg.h)
}

fn mask_for(cfg: &Config, mesh: &Mesh) -> fraceig::Result<SetMask> {
    match &cfg.dirichlet {
        DirichletSpec::Empty => Ok(SetMask::empty(mesh)),
        DirichletSpec::Full => Ok(SetMask::full_candidate(mesh)),
        DirichletSpec::Annulus => fattened_annulus(mesh, cfg.alpha),
        DirichletSpec::Ball { radius, offset } => translated_ball(mesh, *radius, *offset),
        DirichletSpec::Intervals(list) => {
            let list = list.clone();
            SetMask::from_predicate(mesh, move |x| {
                list.iter().any(|&(a, b)| x[0] > a && x[0] < b)
            })
        }
    }
}

fn potential_for(cfg: &Config, mesh: &Mesh) -> fraceig::Result<Option<Potential>> {
    match cfg.potential {
        PotentialSpec::None => Ok(None),
        PotentialSpec::Constant(c) => Ok(Some(Potential::constant(mesh, c)?)),
    }
}

struct Csv {
    w: BufWriter<File>,
}

impl Csv {
    fn create(dir: &Path, name: &str, header: &str) -> Result<Self, String> {
        let path = dir.join(name);
        let file = File::create(&path)
            .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{header}").map_err(|e| e.to_string())?;
        Ok(Csv { w })
    }

    fn row(&mut self, fields: &[CsvField]) -> Result<(), String> {
        let parts: Vec<String> = fields
            .iter()
            .map(|f| match f {
                CsvField::F(x) => format!("{x:.16e}"),
                CsvField::I(x) => x.to_string(),
                CsvField::B(x) => x.to_string(),
                CsvField::H(x) => format!("{x:016x}"),
            })
            .collect();
        writeln!(self.w, "{}", parts.join(",")).map_err(|e| e.to_string())
    }
}

enum CsvField {
    F(f64),
    I(usize),
    B(bool),
    H(u64),
}
use CsvField::{B, F, H, I};

fn write_manifest(dir: &Path, command: &str, cfg: &Config) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let path = dir.join("manifest.txt");
    let mut w = BufWriter::new(
        File::create(&path).map_err(|e| format!("cannot create {}: {e}", path.display()))?,
    );
    writeln!(w, "command = {command}").map_err(|e| e.to_string())?;
    for line in cfg.manifest_lines() {
        writeln!(w, "{line}").map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn write_eigen_outputs(
    dir: &Path,
    cfg: &Config,
    mesh: &Mesh,
    mask: &SetMask,
    eigen: &fraceig::eigensolve::EigenResult,
) -> Result<(), String> {
    let mut eig = Csv::create(dir, "eig.csv", "lambda,iterations,residual,converged")?;
    eig.row(&[
        F(eigen.lambda),
        I(eigen.iterations),
        F(eigen.residual),
        B(eigen.converged),
    ])?;

    let opts = opt_opts(cfg);
    let op = assemble_kernel_with(mesh, mask, cfg.s, cfg.p, &opts.kernel, None)
        .map_err(|e| e.to_string())?;
    let u_global = op.global_nodal(&eigen.u);
    let mut ef = Csv::create(dir, "eigenfunction.csv", "node_index,x,y,u")?;
    for (i, &u) in u_global.iter().enumerate() {
        let pos = mesh.node_pos(i);
        ef.row(&[I(i), F(pos[0]), F(pos[1]), F(u)])?;
    }

    let mut mk = Csv::create(dir, "mask.csv", "cell_index,x,y,selected")?;
    for c in 0..mesh.ncells() {
        let ctr = mesh.cell_center(c);
        mk.row(&[I(c), F(ctr[0]), F(ctr[1]), B(mask.is_selected(c))])?;
    }

    if cfg.export_weights {
        let path = dir.join("weights.csv");
        let file = File::create(&path)
            .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
        op.write_weights_csv(BufWriter::new(file))
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

// ---------------- subcommands ----------------

fn cmd_eig(cfg: &Config, dir: &Path) -> Result<(), String> {
    let mesh = build(cfg).map_err(|e| e.to_string())?;
    let mask = mask_for(cfg, &mesh).map_err(|e| e.to_string())?;
    let v = potential_for(cfg, &mesh).map_err(|e| e.to_string())?;
    let opts = opt_opts(cfg);
    let op = assemble_kernel_with(&mesh, &mask, cfg.s, cfg.p, &opts.kernel, None)
        .map_err(|e| e.to_string())?;
    let eigen = if cfg.p == 2.0 || cfg.restarts == 0 {
        first_eigenpair(&op, v.as_ref(), &opts.solve).map_err(|e| e.to_string())?
    } else {
        first_eigenpair_with_restarts(&op, v.as_ref(), &opts.solve, cfg.restarts, cfg.seed)
            .map_err(|e| e.to_string())?
            .0
    };
    write_eigen_outputs(dir, cfg, &mesh, &mask, &eigen)
}

fn cmd_optimize(cfg: &Config, dir: &Path, maximize: bool) -> Result<(), String> {
    let mesh = build(cfg).map_err(|e| e.to_string())?;
    let v = potential_for(cfg, &mesh).map_err(|e| e.to_string())?;
    let opts = opt_opts(cfg);
    let result: OptResult = if maximize {
        maximize_heuristic(
            &mesh,
            cfg.s,
            cfg.p,
            cfg.alpha,
            v.as_ref(),
            &opts,
            cfg.restarts,
            cfg.seed,
        )
        .map_err(|e| e.to_string())?
    } else {
        alternating_minimize(&mesh, cfg.s, cfg.p, cfg.alpha, v.as_ref(), &opts)
            .map_err(|e| e.to_string())?
    };
    let mut hist = Csv::create(dir, "history.csv", "iter,lambda,mask_hash")?;
    for e in &result.history {
        hist.row(&[I(e.iter), F(e.lambda), H(e.fingerprint)])?;
    }
    write_eigen_outputs(dir, cfg, &mesh, &result.mask, &result.eigen)
}

fn cmd_decay(cfg: &Config, dir: &Path) -> Result<(), String> {
    let mesh = build(cfg).map_err(|e| e.to_string())?;
    let result = decay_experiment(&mesh, cfg.s, cfg.p, cfg.radius, &cfg.k_list, &opt_opts(cfg))
        .map_err(|e| e.to_string())?;
    let mut out = Csv::create(dir, "decay.csv", "k,lambda,mask_measure")?;
    for r in &result.records {
        out.row(&[F(r.k), F(r.lambda), F(r.mask_measure)])?;
    }
    let mut fit = Csv::create(dir, "decay_fit.csv", "slope,expected")?;
    fit.row(&[F(result.slope), F(result.expected)])?;
    Ok(())
}

fn cmd_rate(cfg: &Config, dir: &Path) -> Result<(), String> {
    let mesh = build(cfg).map_err(|e| e.to_string())?;
    let spec = cfg.dirichlet.clone();
    let alpha = cfg.alpha;
    let mask_of = move |m: &Mesh| -> fraceig::Result<SetMask> {
        match &spec {
            DirichletSpec::Empty => Ok(SetMask::empty(m)),
            DirichletSpec::Full => Ok(SetMask::full_candidate(m)),
            DirichletSpec::Annulus => fattened_annulus(m, alpha),
            DirichletSpec::Ball { radius, offset } => translated_ball(m, *radius, *offset),
            DirichletSpec::Intervals(list) => {
                let list = list.clone();
                SetMask::from_predicate(m, move |x| {
                    list.iter().any(|&(a, b)| x[0] > a && x[0] < b)
                })
            }
        }
    };
    let records =
        separated_rate_experiment(&mesh, cfg.p, &cfg.s_list, mask_of, &opt_opts(cfg))
            .map_err(|e| e.to_string())?;
    let mut out = Csv::create(dir, "rate.csv", "s,lambda,ratio")?;
    for r in &records {
        out.row(&[F(r.s), F(r.lambda), F(r.ratio)])?;
    }
    Ok(())
}

fn cmd_sweep(cfg: &Config, dir: &Path) -> Result<(), String> {
    let sweep_cfg = SweepConfig {
        domain: cfg.domain.clone(),
        p: cfg.p,
        alpha: cfg.alpha,
        r: cfg.r,
        base_h: cfg.h,
        s_list: cfg.s_list.clone(),
        potential: match cfg.potential {
            PotentialSpec::None => None,
            PotentialSpec::Constant(c) => Some(c),
        },
        local_ref_h: 1e-3,
    };
    let records = s_sweep(&sweep_cfg, &opt_opts(cfg)).map_err(|e| e.to_string())?;
    let mut out = Csv::create(
        dir,
        "sweep.csv",
        "s,h,lambda_plus_proxy,lambda_annulus,lambda_minus_R,lambda_neumann_nonlocal,\
         local_dirichlet_ref,local_neumann_ref,skipped",
    )?;
    for r in &records {
        out.row(&[
            F(r.s),
            F(r.h),
            F(r.lambda_plus_proxy),
            F(r.lambda_annulus),
            F(r.lambda_minus_r),
            F(r.lambda_neumann_nonlocal),
            F(r.local_dirichlet_ref.unwrap_or(f64::NAN)),
            F(r.local_neumann_ref.unwrap_or(f64::NAN)),
            B(r.skipped),
        ])?;
    }
    Ok(())
}

fn cmd_surround(cfg: &Config, dir: &Path) -> Result<(), String> {
    let mesh = build(cfg).map_err(|e| e.to_string())?;
    let mask = mask_for(cfg, &mesh).map_err(|e| e.to_string())?;
    if cfg.points.is_empty() {
        return Err("surround needs `experiment.points`".into());
    }
    let mut out = Csv::create(dir, "surround.csv", "x,y,eps,measure_in_ball,covered")?;
    for &pt in &cfg.points {
        let r = surround_diagnostic(&mesh, &mask, pt, cfg.eps).map_err(|e| e.to_string())?;
        out.row(&[F(pt[0]), F(pt[1]), F(r.eps), F(r.measure_in_ball), B(r.covered)])?;
    }
    Ok(())
}
