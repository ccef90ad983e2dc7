use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rand::Rng;
use wmctl_core::codec::{self, psnr, BitPayload, CodecConfig, WatermarkKey};
use wmctl_core::dataset::{self, AttributeSpec, DatasetSpec};
use wmctl_core::genproxy::GeneratorProxyConfig;
use wmctl_core::harness::{
    self, render_csv, render_json, render_sweep_csv, render_text, Attack, AttackConfig, CalibrationSource, SweepGrid,
};
use wmctl_core::kvfile;
use wmctl_core::rng::{self, domain};
use wmctl_core::stats::{self, BitMatchSummary, NullCalibration};
use wmctl_core::ImageBuffer;

use crate::{Cli, CodecArgs, Command, Format, PMode};

impl CodecArgs {
    fn config(&self, d: usize) -> Result<CodecConfig> {
        let config = CodecConfig {
            d,
            alpha: self.alpha,
            redundancy: self.redundancy,
            max_passes: self.max_passes,
            ..CodecConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("WMCTL_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow!("ConfigError: WMCTL_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn write_output(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, body).map_err(|e| anyhow!("IoError: {}: {e}", path.display())),
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
            Ok(())
        }
    }
}

fn random_u64(seed: Option<u64>, domain: u64) -> u64 {
    match seed {
        Some(s) => rng::stream(s, domain, 0).random(),
        None => rand::rng().random(),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let info = |msg: String| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };
    let seed = cli.seed;

    match cli.command {
        Command::Keygen => {
            println!("{}", random_u64(seed, domain::KEYGEN));
        }
        Command::PayloadGen { d, out } => {
            let mut rng = rng::stream(random_u64(seed, domain::PAYLOAD), domain::PAYLOAD, 0);
            let payload = BitPayload::random(d, &mut rng)?;
            write_output(out.as_deref(), &payload.to_text())?;
        }
        Command::Embed {
            input,
            out,
            key,
            payload,
            codec: args,
        } => {
            let payload = BitPayload::read(&payload)?;
            let config = args.config(payload.len())?;
            let image = ImageBuffer::read_pnm(&input)?;
            let marked = codec::embed(&image, &payload, WatermarkKey(key), &config)?;
            marked.write_pnm(&out)?;
            info(format!("psnr {:.2} dB", psnr(&image, &marked)?));
        }
        Command::Decode {
            input,
            key,
            d,
            expect,
            codec: args,
        } => {
            let config = args.config(d)?;
            let image = ImageBuffer::read_pnm(&input)?;
            let soft = codec::decode(&image, WatermarkKey(key), &config)?;
            println!("bits {}", soft.bits);
            let scores: Vec<String> = soft.scores.iter().map(|s| format!("{s:.3}")).collect();
            println!("scores {}", scores.join(" "));
            if let Some(path) = expect {
                let w = BitPayload::read(&path)?;
                let k = stats::bit_correct_count(&soft.bits, &w)?;
                println!("accuracy {:.4} ({k}/{d})", stats::bitwise_accuracy(k, d)?);
            }
        }
        Command::Psnr { reference, test } => {
            let a = ImageBuffer::read_pnm(&reference)?;
            let b = ImageBuffer::read_pnm(&test)?;
            println!("{:.4}", psnr(&a, &b)?);
        }
        Command::DatasetSynth {
            out,
            n,
            width,
            height,
            attributes,
        } => {
            let attributes = kvfile::parse_pairs::<f64>(&attributes, 0, "attributes")
                .map_err(|e| anyhow!("ConfigError: {}", e.message))?
                .into_iter()
                .map(|(name, p)| AttributeSpec::new(name, p))
                .collect::<Result<Vec<_>, _>>()?;
            let spec = DatasetSpec {
                n_images: n,
                width,
                height,
                attributes,
                seed: seed.unwrap_or(0),
            };
            let manifest = dataset::synth_dataset(&spec, &out)?;
            for a in &spec.attributes {
                info(format!("{}: {} of {} images", a.name, manifest.count_with(&a.name), n));
            }
            info(format!("wrote {}", out.join("manifest.txt").display()));
        }
        Command::DatasetMark {
            manifest,
            attribute,
            payload,
            key,
            codec: args,
        } => {
            let payload = BitPayload::read(&payload)?;
            let config = args.config(payload.len())?;
            let loaded = dataset::load_manifest(&manifest)?;
            let marked = dataset::mark_subset(&loaded, &attribute, &payload, WatermarkKey(key), &config)?;
            dataset::save_manifest(&marked, &manifest)?;
            info(format!(
                "{} of {} records watermarked (revision {})",
                marked.watermarked_count(),
                marked.records.len(),
                marked.revision
            ));
        }
        Command::Calibrate {
            manifest,
            key,
            payload,
            attribute,
        } => {
            let w = BitPayload::read(&payload)?;
            let mut config = AttackConfig::new(w.clone(), WatermarkKey(key), CalibrationSource::CleanManifest(manifest));
            config.condition = attribute.clone();
            let null = harness::calibrate(&config, &w)?;
            println!("p_w {}", null.unconditional.p_w);
            println!("n_calibration {}", null.unconditional.n_calibration);
            if let Some(a) = attribute {
                let scoped = &null.per_attribute[&a];
                println!("p_w.{a} {}", scoped.null.p_w);
                println!("n_calibration.{a} {}", scoped.null.n_calibration);
                if scoped.fallback {
                    println!("fallback.{a} unconditional null (fewer than {} clean images)", stats::CALIBRATION_FLOOR);
                }
            }
        }
        Command::Attack {
            config,
            proxy,
            format,
            out,
        } => {
            let config = AttackConfig::load(&config)?;
            let proxy = GeneratorProxyConfig::load(&proxy)?;
            let report = harness::run_attack(&config, &proxy, seed.unwrap_or(0))?;
            let body = match format {
                Format::Text => render_text(&report),
                Format::Csv => render_csv(&report),
                Format::Json => render_json(&report)?,
            };
            write_output(out.as_deref(), &body)?;
        }
        Command::Sweep {
            config,
            proxy,
            carrier_rate,
            beta,
            n,
            epsilon,
            marginal,
            seeds,
            out,
        } => {
            if seeds == 0 {
                bail!("ConfigError: --seeds must be at least 1");
            }
            let config = AttackConfig::load(&config)?;
            let proxy = GeneratorProxyConfig::load(&proxy)?;
            let attack = Attack::prepare(&config)?;
            let base = seed.unwrap_or(0);
            let seed_list: Vec<u64> = (0..seeds).map(|s| base.wrapping_add(s)).collect();
            let grid = SweepGrid {
                carrier_rate,
                beta,
                n,
                epsilon,
                marginal,
            };
            let cells = harness::sweep(&attack, &proxy, &grid, &seed_list)?;
            write_output(out.as_deref(), &render_sweep_csv(&cells))?;
        }
        Command::Pvalue {
            mode,
            total,
            k_max,
            n,
            d,
            pw,
        } => {
            let null = NullCalibration::explicit(pw, None)?;
            let (label, log_p) = match mode {
                PMode::Avg => {
                    let k = total.context("UsageError: --mode avg needs --K")?;
                    if k > (n * d) as u64 {
                        bail!("RangeError: K = {k} exceeds n*d = {}", n * d);
                    }
                    let trials = (n * d) as u64;
                    ("p_avg", stats::log_binom_sf(k, trials, pw)?)
                }
                PMode::Max => {
                    let k = k_max.context("UsageError: --mode max needs --k-max")?;
                    if n == 0 {
                        bail!("RangeError: n must be at least 1");
                    }
                    let mut counts = vec![0u32; n];
                    counts[0] = k;
                    let summary = BitMatchSummary::from_counts(d, counts)?;
                    ("p_max", stats::p_max(&summary, &null)?)
                }
            };
            println!("{label} {}", harness::format_log_p(log_p));
            println!("ln_{label} {log_p}");
        }
    }
    Ok(())
}
