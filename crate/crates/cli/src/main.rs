use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::{Array3, Array4, Axis};

use emct2::dictionary::{
    build_dictionary, load_dictionary, save_dictionary, DictionaryGrid, DEFAULT_B1_RANGE, DEFAULT_T2_RANGE,
};
use emct2::emc_sim::SequenceProtocol;
use emct2::eval::{compare_methods, range_masked_t2_errors};
use emct2::fitter::{fit_maps, FastConfig, MeseStack, Method, FLAG_OUTSIDE_MASK};
use emct2::io::{read_mask, read_maps, read_stack, write_maps, write_stack, ProtocolOverrides, RunConfig};
use emct2::phantom::{forward_simulate, make_phantom, select_echoes, NoiseSpec, PhantomSpec};
use emct2::range::RangeSpec;
use emct2::{Error, Result};

#[derive(Parser)]
#[command(name = "emct2", version, about = "Echo-modulation-curve T2 mapping")]
struct Cli {
    /// TOML run configuration; command line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for the parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Default)]
struct ProtocolArgs {
    /// Echo count of the full train.
    #[arg(long)]
    echoes: Option<usize>,
    /// First echo time, ms.
    #[arg(long)]
    te1: Option<f64>,
    /// Echo spacing, ms.
    #[arg(long)]
    dte: Option<f64>,
    #[arg(long)]
    tr: Option<f64>,
    /// T1 assumed in the simulation, ms.
    #[arg(long)]
    t1: Option<f64>,
    /// Nominal refocusing angle, degrees.
    #[arg(long)]
    refocus: Option<f64>,
    /// Retained echoes, 1-based, e.g. `1,3,5`.
    #[arg(long, value_delimiter = ',')]
    select: Option<Vec<usize>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Fast,
}

#[derive(Clone, Copy, ValueEnum)]
enum ImportFormat {
    /// Raw little-endian f32, `slices × rows × cols` per echo.
    Raw,
    /// Binary portable graymap, one slice per echo.
    Pgm,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and save a dictionary.
    Simdict {
        #[arg(long)]
        t2: Option<RangeSpec>,
        #[arg(long)]
        b1: Option<RangeSpec>,
        #[command(flatten)]
        protocol: ProtocolArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build ground-truth maps and a forward-simulated stack.
    Phantom {
        /// Phantom description, TOML.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        protocol: ProtocolArgs,
    },
    /// Fit T2, PD and B1 maps to a stack.
    Fit {
        #[arg(long)]
        dict: Option<PathBuf>,
        #[arg(long)]
        stack: Option<PathBuf>,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Score predicted maps against reference maps.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Second prediction for a paired comparison with `--pred`.
        #[arg(long)]
        pred_b: Option<PathBuf>,
        #[arg(long, default_value = "40:160:40")]
        ranges: RangeSpec,
        #[arg(long)]
        mask: Option<PathBuf>,
        /// JSON report.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Convert per-echo images into a stack file.
    Import {
        /// One file per retained echo, in echo order.
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "raw")]
        format: ImportFormat,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long, default_value_t = 1)]
        slices: usize,
        #[command(flatten)]
        protocol: ProtocolArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

fn required<T>(flag: Option<T>, config: Option<T>, name: &str) -> Result<T> {
    flag.or(config)
        .ok_or_else(|| Error::InvalidArgument(format!("--{name} is required (flag or config)")))
}

fn protocol(args: &ProtocolArgs, cfg: &RunConfig) -> Result<SequenceProtocol> {
    let base = cfg.protocol.apply(&SequenceProtocol::default())?;
    ProtocolOverrides {
        te1: args.te1,
        delta_te: args.dte,
        n_echoes: args.echoes,
        nominal_refocus_deg: args.refocus,
        tr: args.tr,
        t1_assumed: args.t1,
        echo_selection: args.select.clone(),
        pulse: None,
    }
    .apply(&base)
}

fn simdict(cfg: &RunConfig, t2: Option<RangeSpec>, b1: Option<RangeSpec>, args: &ProtocolArgs, out: Option<PathBuf>) -> Result<()> {
    let section = cfg.grid.as_ref();
    let t2 = t2.or(section.map(|g| g.t2)).unwrap_or(DEFAULT_T2_RANGE);
    let b1 = b1.or(section.map(|g| g.b1)).unwrap_or(DEFAULT_B1_RANGE);
    let grid = DictionaryGrid::from_ranges(&t2, &b1)?;
    let out = required(out, cfg.paths.dictionary.clone(), "out")?;
    let protocol = protocol(args, cfg)?;
    let start = Instant::now();
    let dict = build_dictionary(grid, protocol)?;
    let built = start.elapsed();
    save_dictionary(&dict, &out)?;
    println!(
        "dictionary: {} rows ({} T2 × {} B1) × {} echoes, built in {:.3} s, written to {}",
        dict.n_rows(),
        dict.grid().n_t2(),
        dict.grid().n_b1(),
        dict.n_echoes(),
        built.as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn load_phantom_spec(path: &Path) -> Result<PhantomSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::with_path(e, path))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn phantom(cfg: &RunConfig, spec: &Path, seed: Option<u64>, out_dir: Option<PathBuf>, args: &ProtocolArgs) -> Result<()> {
    let mut spec = load_phantom_spec(spec)?;
    if let Some(s) = seed.or(cfg.seed) {
        spec.seed = s;
    }
    let out_dir = required(out_dir, cfg.paths.out_dir.clone(), "out-dir")?;
    let protocol = protocol(args, cfg)?;
    let full = protocol.clone().with_selection((1..=protocol.n_echoes).collect())?;
    let noise = NoiseSpec { sigma: spec.noise_sigma, model: spec.noise_model };

    let truth = make_phantom(&spec)?;
    let stack = forward_simulate(&truth, &full, noise, spec.seed)?;
    let stack = select_echoes(&stack, &protocol.echo_selection)?;
    fs::create_dir_all(&out_dir)?;
    write_maps(out_dir.join("truth"), &truth)?;
    write_stack(out_dir.join("stack.emct"), &stack)?;
    let (s, r, c) = truth.dim();
    println!(
        "phantom: {s} × {r} × {c}, echoes {:?}, seed {}, written to {}",
        protocol.echo_selection,
        spec.seed,
        out_dir.display()
    );
    Ok(())
}

fn fit(
    cfg: &RunConfig,
    dict: Option<PathBuf>,
    stack: Option<PathBuf>,
    mask: Option<PathBuf>,
    method: Option<MethodArg>,
    out_dir: Option<PathBuf>,
) -> Result<()> {
    let dict = load_dictionary(required(dict, cfg.paths.dictionary.clone(), "dict")?)?;
    let mut stack: MeseStack = read_stack(required(stack, cfg.paths.stack.clone(), "stack")?)?;
    if let Some(m) = mask.or(cfg.paths.mask.clone()) {
        stack.mask = Some(read_mask(m)?);
        stack.validate()?;
    }
    let out_dir = required(out_dir, cfg.paths.out_dir.clone(), "out-dir")?;
    let fast = cfg.fit.as_ref().map_or(FastConfig::default(), |f| f.fast);
    let method = match method {
        Some(MethodArg::Exact) => Method::Exact,
        Some(MethodArg::Fast) => Method::Fast(fast),
        None => cfg.fit.as_ref().map_or(Method::Exact, |f| f.method()),
    };
    let start = Instant::now();
    let maps = fit_maps(&stack, &dict, method)?;
    let masked = maps.flags.as_ref().map_or(0, |f| f.iter().filter(|v| **v & FLAG_OUTSIDE_MASK == 0).count());
    if masked > 0 && maps.provenance.degenerate_pixels as usize == masked {
        return Err(Error::Degenerate(format!("all {masked} pixels in the mask are zero or non-finite")));
    }
    write_maps(&out_dir, &maps)?;
    let p = &maps.provenance;
    println!(
        "fit ({}): {} pixels in {:.3} s, {} distance evaluations, {} fallbacks, {} degenerate, written to {}",
        p.fitter,
        maps.t2.len(),
        start.elapsed().as_secs_f64(),
        p.distance_evaluations,
        p.fallbacks,
        p.degenerate_pixels,
        out_dir.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn eval(
    pred: &Path,
    reference: &Path,
    pred_b: Option<&Path>,
    ranges: &RangeSpec,
    mask: Option<&Path>,
    out: &Path,
    csv: Option<&Path>,
) -> Result<()> {
    let bounds = ranges.values();
    let pred = read_maps(pred)?;
    let reference = read_maps(reference)?;
    let mask = mask.map(read_mask).transpose()?;
    let mut report = range_masked_t2_errors(&pred, &reference, &bounds, mask.as_ref().map(|m| m.view()))?;
    if let Some(b) = pred_b {
        let b = read_maps(b)?;
        report.comparisons = compare_methods(&pred, &b, &reference, &bounds)?;
    }
    fs::write(out, report.to_json())?;
    if let Some(csv) = csv {
        fs::write(csv, report.to_csv())?;
    }
    print!("{}", report.to_table());
    Ok(())
}

fn read_echo_image(path: &Path, format: ImportFormat, shape: (usize, Option<usize>, Option<usize>)) -> Result<Array3<f64>> {
    let (slices, rows, cols) = shape;
    match format {
        ImportFormat::Raw => {
            let (Some(rows), Some(cols)) = (rows, cols) else {
                return Err(Error::InvalidArgument("raw import needs --rows and --cols".into()));
            };
            let bytes = fs::read(path).map_err(|e| Error::with_path(e, path))?;
            if bytes.len() != slices * rows * cols * 4 {
                return Err(Error::ShapeMismatch(format!(
                    "{}: {} bytes, expected {} for {slices} × {rows} × {cols} f32",
                    path.display(),
                    bytes.len(),
                    slices * rows * cols * 4
                )));
            }
            let values = bytes.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64).collect();
            Ok(Array3::from_shape_vec((slices, rows, cols), values).expect("length checked"))
        }
        ImportFormat::Pgm => {
            if slices != 1 {
                return Err(Error::InvalidArgument("PGM import holds one slice per echo".into()));
            }
            let img = image::ImageReader::open(path)?
                .with_guessed_format()?
                .decode()
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            let (w, h) = (img.width() as usize, img.height() as usize);
            let values: Vec<f64> = match img {
                image::DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(f64::from).collect(),
                image::DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(f64::from).collect(),
                _ => return Err(Error::Format(format!("{}: not a grayscale image", path.display()))),
            };
            if rows.is_some_and(|r| r != h) || cols.is_some_and(|c| c != w) {
                return Err(Error::ShapeMismatch(format!("{}: image is {h} × {w}", path.display())));
            }
            Ok(Array3::from_shape_vec((1, h, w), values).expect("decoded size"))
        }
    }
}

fn import(
    cfg: &RunConfig,
    files: &[PathBuf],
    format: ImportFormat,
    shape: (usize, Option<usize>, Option<usize>),
    args: &ProtocolArgs,
    out: &Path,
) -> Result<()> {
    let protocol = protocol(args, cfg)?;
    if protocol.n_retained() != files.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} files for {} retained echoes",
            files.len(),
            protocol.n_retained()
        )));
    }
    let images: Vec<Array3<f64>> = files.iter().map(|f| read_echo_image(f, format, shape)).collect::<Result<_>>()?;
    let dim = images[0].dim();
    if images.iter().any(|i| i.dim() != dim) {
        return Err(Error::ShapeMismatch("echo images differ in size".into()));
    }
    let views: Vec<_> = images.iter().map(|i| i.view().insert_axis(Axis(1))).collect();
    let data: Array4<f64> = ndarray::concatenate(Axis(1), &views).expect("shapes checked");
    let stack = MeseStack::new(data, protocol, None)?;
    write_stack(out, &stack)?;
    println!("import: {} echoes of {} × {} × {} written to {}", files.len(), dim.0, dim.1, dim.2, out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.threads.or(cfg.threads) {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    match cli.command {
        Command::Simdict { t2, b1, protocol, out } => simdict(&cfg, t2, b1, &protocol, out),
        Command::Phantom { spec, seed, out_dir, protocol } => phantom(&cfg, &spec, seed, out_dir, &protocol),
        Command::Fit { dict, stack, mask, method, out_dir } => fit(&cfg, dict, stack, mask, method, out_dir),
        Command::Eval { pred, reference, pred_b, ranges, mask, out, csv } => {
            eval(&pred, &reference, pred_b.as_deref(), &ranges, mask.as_deref(), &out, csv.as_deref())
        }
        Command::Import { files, format, rows, cols, slices, protocol, out } => {
            import(&cfg, &files, format, (slices, rows, cols), &protocol, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
