use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tck_core::cv::{nested_cv, CvConfig, Grid, DEFAULT_CS};
use tck_core::dag::dag_visit;
use tck_core::features::{extract_all, write_feature_jsonl, KernelParams, SpaceTag};
use tck_core::formats::{parse_jsonl_dataset, parse_tu_dataset};
use tck_core::graph::{Dataset, Graph};
use tck_core::gram::{gram, Engine, GramMatrix};
use tck_core::oracle::{brute_force_odd, brute_force_tck};
use tck_core::synth::{molecule_like, random_graphs, rng};
use tck_core::{with_threads, Error, Result, Scalar};

#[derive(Parser)]
#[command(name = "tck", version, about = "Tree context graph kernels")]
struct Cli {
    /// Dataset layout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Tu)]
    format: Format,
    /// Worker threads (0 uses all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tu,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridChoice {
    Default,
    Quick,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a dataset.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Write explicit feature vectors as JSON lines.
    Features {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        /// Output file (standard output when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a Gram matrix and write it as CSV with a JSON sidecar.
    Gram {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value = "explicit")]
        engine: Engine,
        #[arg(long)]
        normalize: bool,
        #[arg(long, value_enum, default_value_t = Precision::F64)]
        precision: Precision,
        #[arg(long)]
        out: PathBuf,
    },
    /// Nested cross-validation with grid search.
    Cv {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "tck")]
        kernel: SpaceTag,
        #[arg(long, value_enum, default_value_t = GridChoice::Default)]
        grid: GridChoice,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value_t = 10)]
        outer_folds: usize,
        #[arg(long, default_value_t = 10)]
        inner_folds: usize,
        #[arg(long)]
        normalize: bool,
        /// Deal folds without regard to class.
        #[arg(long)]
        no_stratify: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare explicit kernels with the brute-force oracle on random graphs.
    OracleCheck {
        #[arg(long, default_value_t = 20)]
        graphs: usize,
        #[arg(long, default_value_t = 8)]
        max_nodes: usize,
        #[arg(long, default_value_t = 2)]
        h: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Exit with a failure code when any error exceeds this bound.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Time Gram matrix construction per kernel and height.
    Bench {
        /// Dataset to time; synthetic molecule-like graphs when omitted.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value_t = 300)]
        synthetic: usize,
        #[arg(long, value_delimiter = ',', default_value = "odd,tck")]
        kernels: Vec<SpaceTag>,
        /// Heights as `a..b` (inclusive) or a comma list.
        #[arg(long, default_value = "1..10", value_parser = parse_heights)]
        heights: Heights,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the DAG-visit rooted at one node.
    Dag {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        graph: usize,
        #[arg(long, default_value_t = 0)]
        root: usize,
        #[arg(long, default_value_t = 3)]
        height: usize,
    },
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, default_value = "tck")]
    kernel: SpaceTag,
    #[arg(long, default_value_t = 3)]
    height: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

#[derive(Clone, Debug)]
struct Heights(Vec<usize>);

fn parse_heights(s: &str) -> std::result::Result<Heights, String> {
    let bad = |_| format!("bad height list {s:?}");
    let hs: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (usize, usize) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
        (a..=b).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(bad)).collect::<std::result::Result<_, _>>()?
    };
    if hs.is_empty() || hs.contains(&0) {
        return Err(format!("heights must be >= 1, got {s:?}"));
    }
    Ok(Heights(hs))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::Parse { .. } | Error::InvalidLabel { .. } | Error::InvalidGraph(_) | Error::Json(_) => 4,
        Error::InvalidParameter(_) | Error::NodeOutOfRange { .. } | Error::NodeNotInVisit(_) => 5,
        Error::ZeroDiagonal(_)
        | Error::SingleClass(_)
        | Error::NonConvergence { .. }
        | Error::FoldTooSmall { .. } => 6,
        Error::BudgetExceeded { .. } => 7,
        Error::SpaceMismatch { .. } | Error::InternerMismatch | Error::Shape(_) => 8,
    }
}

const ORACLE_FAILED: u8 = 9;

fn load(format: Format, path: &Path) -> Result<Dataset> {
    match format {
        Format::Tu => parse_tu_dataset(path),
        Format::Jsonl => parse_jsonl_dataset(path),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn flush(mut w: impl Write, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_gram<T: Scalar>(k: &GramMatrix<T>, out: &Path) -> Result<()> {
    let mut csv = create(out)?;
    k.write_csv(&mut csv)?;
    flush(csv, out)?;
    let sidecar = out.with_extension("json");
    let mut json = create(&sidecar)?;
    k.write_sidecar(&mut json)?;
    flush(json, &sidecar)
}

fn build_gram<T: Scalar>(graphs: &[Graph], args: &KernelArgs, engine: Engine, normalize: bool) -> Result<GramMatrix<T>> {
    let p = KernelParams::new(args.height, T::of(args.lambda))?;
    let k = gram(graphs, args.kernel, &p, engine)?;
    if normalize {
        k.normalize()
    } else {
        Ok(k)
    }
}

fn run(cli: Cli) -> Result<u8> {
    let format = cli.format;
    let seed = cli.seed;
    match cli.command {
        Command::Validate { dataset } => {
            let ds = load(format, &dataset)?;
            println!("ok, {} graphs", ds.len());
        }
        Command::Features { dataset, kernel, out } => {
            let ds = load(format, &dataset)?;
            let p = KernelParams::new(kernel.height, kernel.lambda)?;
            let (vectors, interner) = extract_all(ds.graphs(), kernel.kernel, &p);
            match out {
                Some(path) => {
                    let mut w = create(&path)?;
                    write_feature_jsonl(&vectors, &interner, &mut w)?;
                    flush(w, &path)?;
                    println!("{} vectors, {} interned features", vectors.len(), interner.len());
                }
                None => {
                    let stdout = io::stdout();
                    let mut w = stdout.lock();
                    write_feature_jsonl(&vectors, &interner, &mut w)?;
                    flush(w, Path::new("<stdout>"))?;
                }
            }
        }
        Command::Gram {
            dataset,
            kernel,
            engine,
            normalize,
            precision,
            out,
        } => {
            let ds = load(format, &dataset)?;
            let (n, secs) = match precision {
                Precision::F64 => {
                    let k = build_gram::<f64>(ds.graphs(), &kernel, engine, normalize)?;
                    write_gram(&k, &out)?;
                    (k.n(), k.timing.total_seconds)
                }
                Precision::F32 => {
                    let k = build_gram::<f32>(ds.graphs(), &kernel, engine, normalize)?;
                    write_gram(&k, &out)?;
                    (k.n(), k.timing.total_seconds)
                }
            };
            println!("{n}x{n} Gram matrix written to {} ({secs:.3}s)", out.display());
        }
        Command::Cv {
            dataset,
            kernel,
            grid,
            repeats,
            outer_folds,
            inner_folds,
            normalize,
            no_stratify,
            out,
        } => {
            let ds = load(format, &dataset)?;
            let grid = match grid {
                GridChoice::Default => Grid::default_for(kernel),
                GridChoice::Quick => Grid::product(&[kernel], &[1, 2, 3], &[0.5, 1.0, 1.2], &DEFAULT_CS[2..7]),
            };
            let config = CvConfig {
                outer_folds,
                inner_folds,
                repeats,
                seed,
                stratified: !no_stratify,
                normalize,
            };
            let report = nested_cv::<f64>(&ds, &grid, &config)?;
            let mut w = create(&out)?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w).map_err(|e| Error::io(&out, e))?;
            flush(w, &out)?;
            println!("{} {}: accuracy {:.4} +- {:.4}", report.dataset, report.kernel, report.mean, report.std);
        }
        Command::OracleCheck {
            graphs,
            max_nodes,
            h,
            lambda,
            tolerance,
        } => {
            let gs = random_graphs(&mut rng(seed), graphs, 1, max_nodes.max(1), 0.3, 3);
            let p = KernelParams::new(h, lambda)?;
            let mut failed = false;
            for family in [SpaceTag::Tck, SpaceTag::Odd, SpaceTag::TckOdd] {
                let k = gram(&gs, family, &p, Engine::Explicit)?;
                let mut worst = 0.0f64;
                for i in 0..gs.len() {
                    for j in i..gs.len() {
                        let oracle = match family {
                            SpaceTag::Tck => brute_force_tck(&gs[i], &gs[j], &p)?,
                            SpaceTag::Odd => brute_force_odd(&gs[i], &gs[j], &p)?,
                            _ => brute_force_tck(&gs[i], &gs[j], &p)? + brute_force_odd(&gs[i], &gs[j], &p)?,
                        };
                        worst = worst.max((k.get(i, j) - oracle).abs() / oracle.abs().max(1.0));
                    }
                }
                failed |= tolerance.is_some_and(|t| worst > t);
                println!("{family}\tmax relative error {worst:.3e}");
            }
            if failed {
                return Ok(ORACLE_FAILED);
            }
        }
        Command::Bench {
            dataset,
            synthetic,
            kernels,
            heights,
            lambda,
            out,
        } => {
            let graphs: Vec<Graph> = match dataset {
                Some(path) => load(format, &path)?.graphs().to_vec(),
                None => {
                    let mut r = rng(seed);
                    (0..synthetic).map(|_| molecule_like(&mut r, 30)).collect()
                }
            };
            let mut table = String::from("kernel,h,lambda,extract_seconds,fill_seconds,total_seconds\n");
            for &family in &kernels {
                for &h in &heights.0 {
                    let k = gram(&graphs, family, &KernelParams::new(h, lambda)?, Engine::Explicit)?;
                    let t = k.timing;
                    table.push_str(&format!(
                        "{family},{h},{lambda},{:.6},{:.6},{:.6}\n",
                        t.extract_seconds, t.fill_seconds, t.total_seconds
                    ));
                }
            }
            match out {
                Some(path) => {
                    std::fs::write(&path, &table).map_err(|e| Error::io(&path, e))?;
                    println!("timings for {} graphs written to {}", graphs.len(), path.display());
                }
                None => print!("{table}"),
            }
        }
        Command::Dag {
            dataset,
            graph,
            root,
            height,
        } => {
            let ds = load(format, &dataset)?;
            let g = ds.graphs().get(graph).ok_or(Error::NodeOutOfRange {
                node: graph,
                len: ds.len(),
            })?;
            print!("{}", dag_visit(g, root, height)?.dump(g));
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    match with_threads(threads, || run(cli)).and_then(|r| r) {
        Ok(code) => ExitCode::from(code),
        Err(Error::Io { source, .. }) if source.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
