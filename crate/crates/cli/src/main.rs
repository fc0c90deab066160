use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use blindrado::harness::{
    bench, load_ionosphere, misclassification, parse_grid, parse_rows, run_experiment_detailed, ExperimentConfig,
    ExperimentMode, SavedModel,
};
use blindrado::netproto::{ClassifyMode, Transcript};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "blindrado",
    version,
    about = "Learning from encrypted Rademacher observations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Paillier key pair; writes PATH (secret) and PATH.pub.
    Keygen {
        #[arg(long, default_value_t = 512)]
        bits: u64,
        #[arg(long)]
        out: PathBuf,
        /// Deterministic keys from this seed instead of OS randomness.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train in one of the four modes and write metrics, model and transcript.
    Train {
        #[arg(long)]
        mode: Option<ExperimentMode>,
        #[arg(long)]
        peers: Option<usize>,
        #[arg(long)]
        rados: Option<usize>,
        /// Flat key = value experiment config; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Ionosphere-format CSV.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify feature rows with a trained model through the protocol.
    Classify {
        #[arg(long)]
        model: PathBuf,
        /// One row per line: comma-separated features, optionally a class.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "partitioned")]
        mode: ClassifyMode,
        /// The querying peer.
        #[arg(long, default_value_t = 0)]
        peer: usize,
    },
    /// Run a config grid and print per-mode training times.
    Bench {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Required encrypted-over-plain slowdown.
        #[arg(long, default_value_t = 10.0)]
        min_ratio: f64,
    },
    /// Quick end-to-end checks of every layer.
    Selftest,
    /// Check a transcript and summarize its traffic.
    Replay {
        #[arg(long)]
        transcript: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}

/// The error chain, skipping causes their parent already prints.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Keygen { bits, out, seed } => keygen(bits, &out, seed)?,
        Command::Train {
            mode,
            peers,
            rados,
            config,
            data,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig::default(),
            };
            cfg.mode = mode.unwrap_or(cfg.mode);
            cfg.peers = peers.unwrap_or(cfg.peers);
            cfg.rados_per_peer = rados.unwrap_or(cfg.rados_per_peer);
            train(&cfg, &data, &out)?;
        }
        Command::Classify {
            model,
            input,
            mode,
            peer,
        } => classify(&model, &input, mode, peer)?,
        Command::Bench { grid, data, min_ratio } => {
            let text = fs::read_to_string(&grid).with_context(|| format!("reading {}", grid.display()))?;
            let table = bench(&parse_grid(&text)?, &load_ionosphere(&data)?)?;
            print!("{}", table.to_text());
            if let Some(ratio) = table.encrypted_over_plain() {
                println!("encrypted / plain: {ratio:.1}x");
                table.check_ordering(min_ratio)?;
            }
        }
        Command::Selftest => return Ok(selftest()),
        Command::Replay { transcript } => {
            let summary = Transcript::load(&transcript)?.replay()?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn keygen(bits: u64, out: &Path, seed: Option<u64>) -> Result<()> {
    use rand::SeedableRng;
    let mut rng = match seed {
        Some(s) => rand_chacha::ChaCha20Rng::seed_from_u64(s),
        None => rand_chacha::ChaCha20Rng::from_entropy(),
    };
    let (pk, sk) = blindrado::paillier::keygen(bits, &mut rng)?;
    fs::write(out, sk.to_bytes()).with_context(|| format!("writing {}", out.display()))?;
    let mut public = out.as_os_str().to_owned();
    public.push(".pub");
    fs::write(&public, pk.to_bytes())?;
    println!(
        "{}-bit key written to {} and {}",
        pk.bits(),
        out.display(),
        Path::new(&public).display()
    );
    Ok(())
}

fn train(cfg: &ExperimentConfig, data: &Path, out: &Path) -> Result<()> {
    let ds = load_ionosphere(data)?;
    let outcome = run_experiment_detailed(cfg, &ds)?;
    fs::create_dir_all(out)?;
    outcome.report.save(&out.join("metrics.json"))?;
    SavedModel::from_outcome(&outcome)?.save(out)?;
    if let Some(session) = &outcome.session {
        session.transcript().save(&out.join("transcript.jsonl"))?;
        session.audit().check()?;
    }
    println!(
        "{}: misclassification {:.4} on {} test examples, training {:.3}s",
        cfg.mode,
        outcome.report.misclassification,
        outcome.test.m(),
        outcome.report.training_seconds()
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn classify(dir: &Path, input: &Path, mode: ClassifyMode, peer: usize) -> Result<()> {
    let model = SavedModel::load(dir)?;
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let (rows, truth) = parse_rows(&text, model.feature_dim())?;
    let labels = model.classify(&rows, mode, peer)?;
    for l in &labels {
        println!("{l}");
    }
    if let Some(truth) = truth {
        eprintln!("misclassification {:.4}", misclassification(&labels, &truth)?);
    }
    Ok(())
}

type Check = (&'static str, fn() -> Result<()>);

fn selftest() -> ExitCode {
    let checks: [Check; 4] = [
        ("paillier laws at 512 bits", check_paillier),
        ("secure matrix product", check_secure_product),
        ("encrypted training parity", check_training),
        ("partitioned classification", check_classification),
    ];
    let mut ok = true;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("PASS {name}"),
            Err(e) => {
                ok = false;
                println!("FAIL {name}: {e:#}");
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn check_paillier() -> Result<()> {
    use blindrado::paillier::keygen;
    use num_bigint::{BigInt, RandBigInt};
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
    let (pk, sk) = keygen(512, &mut rng)?;
    for _ in 0..10 {
        let x = rng.gen_biguint_below(pk.n());
        let y = rng.gen_biguint_below(pk.n());
        let a = rng.gen_bigint(64);
        let (cx, cy) = (pk.encrypt(&x, &mut rng)?, pk.encrypt(&y, &mut rng)?);
        if sk.decrypt(&cx)? != x {
            bail!("roundtrip");
        }
        if sk.decrypt(&pk.hom_add(&cx, &cy)?)? != (&x + &y) % pk.n() {
            bail!("additive homomorphism");
        }
        let want = pk.reduce(&(BigInt::from(x.clone()) * &a));
        if sk.decrypt(&pk.hom_scalar_mul(&a, &cx))? != want {
            bail!("scalar homomorphism");
        }
    }
    Ok(())
}

fn check_secure_product() -> Result<()> {
    use blindrado::linalg::Matrix;
    use blindrado::paillier::keygen;
    use blindrado::secmath::{KeyHolder, SecureWorker};
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(2);
    let (_, sk) = keygen(256, &mut rng)?;
    let mut holder = KeyHolder::new(sk.clone(), 32, 3)?;
    let ctx = holder.context().clone();
    let a = Matrix::from_rows(&[vec![1.5, -2.0], vec![0.25, 3.0]])?;
    let b = Matrix::from_rows(&[vec![-1.0, 0.5], vec![2.0, 4.0]])?;
    let enc = |m: &Matrix<f64>, rng: &mut rand_chacha::ChaCha20Rng| {
        m.try_map(|v| ctx.codec().encrypt_at(ctx.pk(), v, 32, rng))
    };
    let (ea, eb) = (enc(&a, &mut rng)?, enc(&b, &mut rng)?);
    let prod = SecureWorker::new(&ctx, &mut holder, &mut rng).sec_mat_prod(&ea, &eb)?;
    let want = a.matmul(&b)?;
    for (c, w) in prod.iter().zip(want.iter()) {
        let got: f64 = ctx.codec().decrypt(&sk, c)?;
        if (got - w).abs() > 1e-6 {
            bail!("expected {w}, decrypted {got}");
        }
    }
    Ok(())
}

fn check_training() -> Result<()> {
    use blindrado::netproto::{plain_reference, run_train, PeerInput, TrainConfig};
    use blindrado::rado::{Dataset, Label};
    let rows = |off: f64| -> Vec<Vec<f64>> {
        (0..6)
            .map(|i| vec![i as f64 / 3.0 - off, 1.0 - off * i as f64 / 6.0, off])
            .collect()
    };
    let labels: Vec<Label> = (0..6)
        .map(|i| if i % 2 == 0 { Label::Positive } else { Label::Negative })
        .collect();
    let data = vec![
        Dataset::from_rows(rows(0.5), labels.clone())?,
        Dataset::from_rows(rows(-0.25), labels)?,
    ];
    let cfg = TrainConfig {
        key_bits: 256,
        rados_per_peer: 4,
        ..Default::default()
    };
    let inputs: Vec<PeerInput<f64>> = data.iter().cloned().map(PeerInput::Numeric).collect();
    let session = run_train(&inputs, &cfg)?;
    session.audit().check()?;
    let got = session.reveal_theta()?;
    let want = plain_reference(&data, &cfg)?;
    let err = got.iter().zip(&want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        / want.iter().map(|b| b * b).sum::<f64>().sqrt();
    if err > 1e-3 {
        bail!("relative error {err}");
    }
    Ok(())
}

fn check_classification() -> Result<()> {
    use blindrado::netproto::{Session, TrainConfig};
    use blindrado::rado::Label;
    let cfg = TrainConfig {
        key_bits: 256,
        ..Default::default()
    };
    let presence = vec![vec![true, true, false], vec![false, false, true]];
    let mut s = Session::with_plain_theta(&cfg, presence, &[1.0, -1.0, 2.0])?;
    if s.classify(0, &[1.0, 1.0, 1.0], ClassifyMode::Partitioned)? != Label::Positive {
        bail!("wrong sign");
    }
    s.audit().check()?;
    Ok(())
}
