use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use edgecache::bench::{emit_report, run_benchmark, BenchReport};
use edgecache::config::Config;
use edgecache::greedy::gca;
use edgecache::neural::{init_bank_for, load_bank, save_bank, train_bank, TrainSample};
use edgecache::pipeline::solve_with_cnn;
use edgecache::scenario::{generate_dataset, load_dataset, save_dataset, InstanceSet};
use edgecache::solver::{enumerate_optimal, evaluate_assignment, solve_instance, DEFAULT_ENUMERATION_CAP};
use edgecache::topology::{build_topology, shortest_paths, TopologyDocument};
use edgecache::{Error, Result};

/// Proactive edge caching for mobile users.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a random topology and its shortest-path tables.
    GenTopology {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "topology.json")]
        out: PathBuf,
    },
    /// Sample instances; labelled with their exact optimum unless `--unlabelled`.
    Gen {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        unlabelled: bool,
        #[arg(long, default_value = "data.json")]
        out: PathBuf,
    },
    /// Label an unlabelled instance file with exact optima.
    Label {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long, default_value = "data.json")]
        out: PathBuf,
    },
    /// Train a classifier bank on a labelled dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "bank.ckpt")]
        out: PathBuf,
        /// Where to write the per-epoch loss report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Solve every instance of an instance file.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = SolveMethod::Milp)]
        method: SolveMethod,
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        time_limit: Option<f64>,
        /// Solve only this instance.
        #[arg(long)]
        index: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare MILP, CNN and GCA over fresh test sets.
    Bench {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        flows: Option<Vec<usize>>,
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        parallel: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Print a saved benchmark report as a table.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Also rewrite it as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveMethod {
    Milp,
    Oracle,
    Gca,
    Cnn,
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn init_threads() {
    if let Some(n) = std::env::var("EDGECACHE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run() -> Result<()> {
    init_threads();
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.cmd {
        Cmd::GenTopology { seed, out } => {
            if let Some(s) = seed {
                cfg.topology_seed = s;
            }
            let t = build_topology(&cfg.topology())?;
            TopologyDocument::new(t).save(&out)?;
            println!("wrote {}", out.display());
        }
        Cmd::Gen {
            topology,
            n,
            k,
            seed,
            unlabelled,
            out,
        } => {
            let doc = TopologyDocument::load(&topology)?;
            let params = cfg.scenario(k);
            if unlabelled {
                InstanceSet::sample(&doc.topology, &params, n, seed).save(&out)?;
            } else {
                let ds = generate_dataset(&doc.topology, &doc.paths, n, &params, &cfg.limits(), seed)?;
                save_dataset(&ds, &out)?;
                println!("{} samples, {} redrawn", ds.samples.len(), ds.resampled);
            }
            println!("wrote {}", out.display());
        }
        Cmd::Label {
            instances,
            time_limit,
            out,
        } => {
            if time_limit.is_some() {
                cfg.time_limit_s = time_limit;
            }
            let set = InstanceSet::load(&instances)?;
            let pt = shortest_paths(&set.topology);
            let ds = set.label(&pt, &cfg.limits())?;
            save_dataset(&ds, &out)?;
            println!("{} labelled, {} dropped on timeout; wrote {}", ds.samples.len(), ds.resampled, out.display());
        }
        Cmd::Train {
            data,
            epochs,
            lr,
            seed,
            out,
            report,
        } => {
            let ds = load_dataset(&data)?;
            let mut hyper = cfg.training;
            if let Some(e) = epochs {
                hyper.epochs = e;
            }
            if let Some(r) = lr {
                hyper.lr = r;
            }
            if let Some(s) = seed {
                hyper.seed = s;
            }
            let train: Vec<TrainSample> = ds.train_samples().map(TrainSample::from).collect();
            let test: Vec<TrainSample> = ds.test_samples().map(TrainSample::from).collect();
            let mut arch = cfg.architecture();
            arch.input_rows = ds.params.flows;
            arch.input_cols = ds.topology.num_access_routers() + ds.topology.num_edge_clouds() + ds.topology.num_links();
            arch.outputs = ds.topology.num_edge_clouds();
            let bank = init_bank_for(&arch, ds.params.flows, arch.outputs, hyper.seed)?;
            let (bank, rep) = train_bank(&bank, &train, &test, &hyper)?;
            save_bank(&bank, &out)?;
            for (i, m) in rep.models.iter().enumerate() {
                println!(
                    "model {i}: loss {:.4} -> {:.4}, test acc {:.3}",
                    m.train_loss.first().copied().unwrap_or(f64::NAN),
                    m.train_loss.last().copied().unwrap_or(f64::NAN),
                    m.test_accuracy
                );
            }
            if let Some(p) = report {
                write_text(&p, &serde_json::to_string_pretty(&rep)?)?;
            }
            println!("wrote {}", out.display());
        }
        Cmd::Solve {
            instance,
            method,
            bank,
            delta,
            time_limit,
            index,
            out,
        } => {
            if time_limit.is_some() {
                cfg.time_limit_s = time_limit;
            }
            if let Some(d) = delta {
                cfg.threshold_of_prediction_probability = d;
            }
            let set = InstanceSet::load(&instance)?;
            let pt = shortest_paths(&set.topology);
            let bank = match (method, bank) {
                (SolveMethod::Cnn, Some(p)) => Some(load_bank(p)?),
                (SolveMethod::Cnn, None) => return Err(Error::MissingBank("solve --method cnn needs --bank".into())),
                _ => None,
            };
            let chosen: Vec<usize> = match index {
                Some(i) if i < set.instances.len() => vec![i],
                Some(i) => return Err(Error::DimensionMismatch(format!("no instance {i} in a file of {}", set.instances.len()))),
                None => (0..set.instances.len()).collect(),
            };
            let penalty = cfg.penalty();
            let mut docs = Vec::new();
            for i in chosen {
                let inst = &set.instances[i];
                let eval = match method {
                    SolveMethod::Milp => {
                        let sol = solve_instance(inst, &pt, &cfg.limits())?;
                        evaluate_assignment(inst, &pt, &sol.x, &sol.z, &penalty).with_solver_info(&sol)
                    }
                    SolveMethod::Oracle => {
                        let sol = enumerate_optimal(inst, &pt, DEFAULT_ENUMERATION_CAP)?;
                        evaluate_assignment(inst, &pt, &sol.x, &sol.z, &penalty).with_solver_info(&sol)
                    }
                    SolveMethod::Gca => gca(inst, &pt, &penalty),
                    SolveMethod::Cnn => {
                        let bank = bank.as_ref().expect("checked above");
                        solve_with_cnn(inst, &pt, bank, &cfg.pipeline())?.solution
                    }
                };
                println!(
                    "#{i}: tc={:.6} feasible={} placement={:?}",
                    eval.total_cost,
                    eval.feasible(),
                    eval.placement()
                );
                docs.push(serde_json::from_str::<serde_json::Value>(&eval.as_solution().to_json()?)?);
            }
            if let Some(p) = out {
                write_text(&p, &serde_json::to_string_pretty(&docs)?)?;
            }
        }
        Cmd::Bench {
            topology,
            bank,
            samples,
            flows,
            time_limit,
            parallel,
            out_dir,
        } => {
            if time_limit.is_some() {
                cfg.time_limit_s = time_limit;
            }
            let mut bc = cfg.bench();
            if let Some(n) = samples {
                bc.samples = n;
            }
            if let Some(f) = flows {
                bc.flows = f;
            }
            bc.parallel = parallel;
            let doc = TopologyDocument::load(&topology)?;
            let bank = bank.map(load_bank).transpose()?;
            let rep = run_benchmark(&doc.topology, bank.as_ref(), &bc)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let (csv, json) = emit_report(&rep, &out_dir, "bench")?;
            print_table(&rep);
            println!("wrote {} and {}", csv.display(), json.display());
        }
        Cmd::Report { input, csv } => {
            let text = std::fs::read_to_string(&input).map_err(|e| Error::io(&input, e))?;
            let rep = BenchReport::from_json(&text)?;
            print_table(&rep);
            if let Some(p) = csv {
                write_text(&p, &rep.to_csv()?)?;
            }
        }
    }
    Ok(())
}

fn print_table(rep: &BenchReport) {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    println!(
        "{:>3} {:>5} {:>10} {:>10} {:>9} {:>9} {:>9} {:>9} {:>4}",
        "K", "meth", "time_s", "mean_tc", "prec", "feasible", "max_diff", "vars", "to"
    );
    for r in &rep.rows {
        println!(
            "{:>3} {:>5} {:>10.4} {:>10.4} {:>9} {:>9.3} {:>9} {:>9} {:>4}",
            r.flows,
            r.method.name(),
            r.mean_time,
            r.mean_tc,
            opt(r.precision),
            r.feasible_ratio,
            opt(r.max_diff),
            opt(r.mean_variables),
            r.reference_timeouts
        );
    }
}
