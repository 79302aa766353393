use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rbfprice::harness::{
    convergence_study, price, table_run, timing_study, Method, RunConfig, RunRequest,
};
use rbfprice::models::{builtin, ProblemSpec};

#[derive(Parser)]
#[command(name = "rbfprice", version, about = "Mesh-free option pricing with RBF-FD and RBF-PUM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price one problem at one resolution.
    Price(Common),
    /// Errors against reference values over several resolutions.
    Converge(Common),
    /// Option values per resolution.
    Table(Common),
    /// Assembly and total times over resolutions and worker counts.
    Time(Common),
}

#[derive(Args)]
struct Common {
    /// Built-in problem: qlsv1, qlsv2, sabr1, sabr2, hhw or hcir.
    #[arg(long, default_value = "qlsv1")]
    problem: String,
    #[arg(long, default_value = "rbffd")]
    method: String,
    /// Spot-axis node count; repeat for studies.
    #[arg(long = "ns", default_values_t = [40])]
    ns: Vec<usize>,
    /// Time steps (default 2 N_s).
    #[arg(long)]
    nt: Option<usize>,
    /// Worker threads for assembly; repeat for `time`.
    #[arg(long = "workers")]
    workers: Vec<usize>,
    /// TOML file with `problem` and `solver` tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Setup {
    problem: ProblemSpec,
    method: Method,
    options: rbfprice::harness::SolverOptions,
}

impl Common {
    fn setup(&self) -> Result<Setup> {
        let cfg = match &self.config {
            Some(path) => RunConfig::load(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => RunConfig::default(),
        };
        let problem = match cfg.problem {
            Some(p) => p,
            None => builtin(&self.problem)?,
        };
        let method: Method = self.method.parse()?;
        let mut options = cfg.solver;
        if self.nt.is_some() {
            options.nt = self.nt;
        }
        if let Some(&w) = self.workers.first() {
            options.workers = w;
        }
        Ok(Setup {
            problem,
            method,
            options,
        })
    }

    fn single_ns(&self) -> Result<usize> {
        match self.ns.as_slice() {
            [n] => Ok(*n),
            _ => bail!("`price` takes exactly one --ns"),
        }
    }

    fn csv_sink(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Price(c) => {
            let s = c.setup()?;
            let req = RunRequest::new(s.problem, s.method, c.single_ns()?).with_options(s.options);
            let rep = price(&req)?;
            if c.out.is_some() {
                rep.write_csv(c.csv_sink()?)?;
            }
            println!("{rep}");
        }
        Command::Converge(c) => {
            let s = c.setup()?;
            let study = convergence_study(&s.problem, s.method, &c.ns, &s.options)?;
            study.write_csv(c.csv_sink()?)?;
            if let Some(order) = study.order {
                eprintln!("fitted order: {order:.3}");
            }
        }
        Command::Table(c) => {
            let s = c.setup()?;
            let table = table_run(&s.problem, s.method, &c.ns, &s.options)?;
            if c.out.is_some() {
                table.write_csv(c.csv_sink()?)?;
            }
            print!("{}", table.to_text());
        }
        Command::Time(c) => {
            let s = c.setup()?;
            let workers = if c.workers.is_empty() { vec![1] } else { c.workers.clone() };
            let study = timing_study(&s.problem, s.method, &c.ns, &workers, &s.options)?;
            study.write_csv(c.csv_sink()?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
