use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hhsar::cli::{self, Algorithm, CutSpec, RunConfig};
use hhsar::ffbp::{default_levels, FfbpParams, Kernel};
use hhsar::io::{self, PgmDepth};
use hhsar::metrics::{max_intensity_projection, DEFAULT_FLOOR_DB};
use hhsar::model::{ImagingRegion, Point3};
use hhsar::spectrum::nyquist_dims;
use hhsar::{Error, Result};

#[derive(Parser)]
#[command(
    name = "hhsar",
    version,
    about = "Near-range 3-D SAR imaging for handheld apertures"
)]
struct Args {
    /// Worker threads (default: $HHSAR_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Bpa,
    Hhffbpa,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Linear,
    Cubic,
}

impl From<KernelArg> for Kernel {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Linear => Kernel::Linear,
            KernelArg::Cubic => Kernel::Cubic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    X,
    Y,
    Z,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a measurement cube from a config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output base path (writes .json and .bin); defaults to output.cube.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct a volume from a cube.
    Reconstruct {
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long, default_value_t = 1.4)]
        oversample: f64,
        #[arg(long, value_enum, default_value = "linear")]
        kernel: KernelArg,
        /// nx,ny,nz (default: Nyquist rate).
        #[arg(long, value_parser = parse_list::<usize, 3>)]
        dims: Option<[usize; 3]>,
        /// x_min,x_max,y_min,y_max,z_min,z_max (default: the cube's region).
        #[arg(long, value_parser = parse_list::<f64, 6>, allow_hyphen_values = true)]
        region: Option<[f64; 6]>,
        /// Write the per-level report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare a test volume with a reference.
    Metrics {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Axis (x|y|z), optionally followed by ,px,py,pz[,half_width].
        #[arg(long, allow_hyphen_values = true)]
        psf_cut: Option<CutSpec>,
        /// Metrics JSON path (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a maximum-intensity projection as PGM.
    Project {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "z")]
        axis: AxisArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FLOOR_DB, allow_negative_numbers = true)]
        floor_db: f64,
        #[arg(long)]
        sixteen_bit: bool,
    },
    /// Time both reconstructors over a sweep of aperture sizes.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "17,25,33,49")]
        sizes: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.4)]
        oversample: f64,
        #[arg(long, value_enum, default_value = "linear")]
        kernel: KernelArg,
    },
}

/// `N` comma-separated values.
fn parse_list<T: std::str::FromStr, const N: usize>(s: &str) -> std::result::Result<[T; N], String>
where
    T::Err: std::fmt::Display,
{
    let v: Vec<T> = s
        .split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    let n = v.len();
    v.try_into()
        .map_err(|_| format!("expected {N} comma-separated values, got {n}"))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e))
        }
    }
}

fn run(args: Args) -> Result<()> {
    if let Some(n) = cli::thread_count(args.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    match args.command {
        Command::Simulate { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let out = out
                .or(cfg.output.cube.clone())
                .ok_or_else(|| Error::Config {
                    field: "output.cube".into(),
                    message: "no --out given and none configured".into(),
                })?;
            let cube = cli::simulate(&cfg)?;
            io::write_cube_with_region(&out, &cube, Some(&cfg.region.build()?))?;
            eprintln!(
                "simulated {} elements x {} frequencies -> {}",
                cube.element_count(),
                cube.freqs().count(),
                out.display()
            );
            Ok(())
        }
        Command::Reconstruct {
            algo,
            input,
            out,
            levels,
            oversample,
            kernel,
            dims,
            region,
            report,
        } => {
            let (cube, stored) = io::read_cube_with_region(&input)?;
            let region = match region {
                Some(r) => ImagingRegion::new(
                    Point3::new(r[0], r[2], r[4]),
                    Point3::new(r[1], r[3], r[5]),
                )?,
                None => stored.ok_or_else(|| {
                    Error::InvalidParameter("cube has no recorded region; pass --region".into())
                })?,
            };
            let dims = match dims {
                Some(d) => d,
                None => nyquist_dims(cube.aperture(), &region, cube.freqs())?,
            };
            let algorithm = match algo {
                Algo::Bpa => Algorithm::Bpa,
                Algo::Hhffbpa => {
                    let side = cube
                        .aperture()
                        .scan_shape()
                        .map(|(a, b)| a.max(b))
                        .unwrap_or(cube.element_count());
                    Algorithm::from(FfbpParams {
                        levels: levels.unwrap_or_else(|| default_levels(side)),
                        oversampling: oversample,
                        kernel: kernel.into(),
                    })
                }
            };
            let r = cli::reconstruct(&cube, &region, &algorithm, dims)?;
            eprintln!(
                "{} {}x{}x{} in {:.3} s",
                algorithm.name(),
                dims[0],
                dims[1],
                dims[2],
                r.seconds
            );
            if let Some(rep) = &r.report {
                for l in &rep.levels {
                    eprintln!(
                        "  level {}: {} subimages, {} grid points ({} valid), {} flagged",
                        l.level, l.subimages, l.lattice_points, l.valid_points, l.flagged
                    );
                }
                if let Some(path) = report {
                    io::write_json(&path, rep)?;
                }
            }
            io::write_volume(&out, &r.volume)
        }
        Command::Metrics {
            reference,
            test,
            psf_cut,
            out,
        } => {
            let reference = io::read_volume(&reference)?;
            let test = io::read_volume(&test)?;
            let report = cli::compare(&reference, &test, psf_cut)?;
            match out {
                Some(path) => io::write_json(&path, &report),
                None => {
                    let text = serde_json::to_string_pretty(&report)
                        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    println!("{text}");
                    Ok(())
                }
            }
        }
        Command::Project {
            input,
            axis,
            out,
            floor_db,
            sixteen_bit,
        } => {
            let volume = io::read_volume(&input)?;
            let axis = match axis {
                AxisArg::X => 0,
                AxisArg::Y => 1,
                AxisArg::Z => 2,
            };
            let image = max_intensity_projection(&volume, axis, floor_db)?;
            let depth = if sixteen_bit {
                PgmDepth::Sixteen
            } else {
                PgmDepth::Eight
            };
            io::export_projection(&image, &out, depth)
        }
        Command::Bench {
            config,
            sizes,
            out,
            oversample,
            kernel,
        } => {
            let cfg = RunConfig::load(&config)?;
            let rows = cli::bench(&cfg, &sizes, oversample, kernel.into());
            for r in rows.iter().filter(|r| r.error.is_some()) {
                eprintln!(
                    "size {} {}: {}",
                    r.size,
                    r.algo,
                    r.error.as_deref().unwrap_or_default()
                );
            }
            io::write_text(&out, &cli::bench_csv(&rows))?;
            for algo in ["bpa", "hhffbpa"] {
                match cli::fit_slope(&rows, algo) {
                    Some(s) => eprintln!("{algo} log-log slope {s:.2}"),
                    None => eprintln!("{algo}: not enough sizes for a slope"),
                }
            }
            for (size, s) in cli::speedups(&rows) {
                eprintln!("size {size}: speedup {s:.1}x");
            }
            Ok(())
        }
    }
}
