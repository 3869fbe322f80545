//! The six pipeline subcommands.
//!
//! Each command resolves its options through [`FileConfig`], writes a
//! `run.json` with the resolved values, performs the work through the
//! library, and prints a short summary. All randomness inside a command
//! descends from its single `--seed`.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use voxcluster::audio::{canonicalize, load_wav, AudioClip};
use voxcluster::clustering::{agglomerate, cut, CutTarget};
use voxcluster::embedding::{embed_clip, EmbeddingSet};
use voxcluster::pca::pca_project;
use voxcluster::manifest::{CorpusManifest, Split};
use voxcluster::nn::{
    load_model, save_model, sgd_train, snippet_dataset, Architecture, CnnModel, TrainConfig,
};
use voxcluster::segmentation::diarize;
use voxcluster::svm::{identify, train_ensemble, SvmEnsemble};
use voxcluster::synth::synth_speaker_corpus;
use voxcluster::tsne::{default_perplexity, tsne_project, DEFAULT_TSNE_ITERS};
use voxcluster::viz::{dendrogram_svg, projection_csv, scatter_svg};
use voxcluster::{Error, Result};

use crate::config::{write_run_record, FileConfig};

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn load_clip(path: &Path) -> Result<AudioClip> {
    Ok(canonicalize(load_wav(path)?))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "clip".to_string(), |s| s.to_string_lossy().into_owned())
}

#[derive(Args)]
pub struct SynthArgs {
    /// Number of speakers.
    #[arg(long, env = "VOX_SPEAKERS")]
    speakers: Option<usize>,
    /// Clips per speaker.
    #[arg(long, env = "VOX_CLIPS")]
    clips: Option<usize>,
    /// Clip length in seconds; at least the 1 s analysis window.
    #[arg(long, env = "VOX_SECONDS")]
    seconds: Option<f64>,
    /// Seed for every generated waveform.
    #[arg(long, env = "VOX_SEED")]
    seed: Option<u64>,
    /// Corpus output directory.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct SynthParams {
    speakers: usize,
    clips: usize,
    seconds: f64,
    out: PathBuf,
}

pub fn cmd_synth(args: SynthArgs, file: &FileConfig) -> Result<()> {
    let speakers = file.usize(args.speakers, "speakers", 8)?;
    let clips = file.usize(args.clips, "clips", 10)?;
    let seconds = file.f64(args.seconds, "seconds", 4.0)?;
    let seed = file.u64(args.seed, "seed", 42)?;
    if seconds < 1.0 {
        return Err(Error::Config(format!(
            "clip length {seconds} s is shorter than the 1 s analysis window"
        )));
    }

    let params = SynthParams {
        speakers,
        clips,
        seconds,
        out: args.out.clone(),
    };
    write_run_record(&args.out, "synth", Some(seed), &params)?;
    let manifest = synth_speaker_corpus(speakers, clips, seconds, seed, &args.out)?;
    let val = manifest
        .entries
        .iter()
        .filter(|e| e.split == Some(Split::Validation))
        .count();
    println!(
        "wrote {} clips for {speakers} speakers to {} ({} train / {val} validation)",
        manifest.entries.len(),
        args.out.display(),
        manifest.entries.len() - val,
    );
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    /// Corpus manifest CSV.
    #[arg(long)]
    manifest: PathBuf,
    /// Training epochs.
    #[arg(long, env = "VOX_EPOCHS")]
    epochs: Option<usize>,
    /// SGD learning rate; 0 freezes the weights.
    #[arg(long, env = "VOX_LR")]
    lr: Option<f64>,
    /// Mini-batch size.
    #[arg(long, env = "VOX_BATCH")]
    batch: Option<usize>,
    /// Dropout rate between the dense layers.
    #[arg(long, env = "VOX_DROPOUT")]
    dropout: Option<f64>,
    /// Window hop in seconds when cutting clips into training snippets.
    #[arg(long, env = "VOX_HOP")]
    hop: Option<f64>,
    /// Seed for weight init, shuffling, and dropout.
    #[arg(long, env = "VOX_SEED")]
    seed: Option<u64>,
    /// Use the small desk-scale architecture instead of the full one.
    #[arg(long)]
    reduced: bool,
    /// Output directory for model.voxcnn and metrics.csv.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct TrainParams {
    manifest: PathBuf,
    epochs: usize,
    lr: f64,
    batch: usize,
    dropout: f64,
    hop: f64,
    reduced: bool,
    speakers: usize,
    out: PathBuf,
}

pub fn cmd_train(args: TrainArgs, file: &FileConfig, verbose: bool) -> Result<()> {
    let epochs = file.usize(args.epochs, "epochs", 30)?;
    let lr = file.f64(args.lr, "lr", 0.01)?;
    let batch = file.usize(args.batch, "batch", 32)?;
    let dropout = file.f64(args.dropout, "dropout", 0.0)?;
    let hop = file.f64(args.hop, "hop", 1.0)?;
    let seed = file.u64(args.seed, "seed", 42)?;

    let manifest = CorpusManifest::load(&args.manifest)?;
    let speakers = manifest.num_speakers();
    if speakers < 2 {
        return Err(Error::Config(format!(
            "training needs at least 2 speakers, manifest has {speakers}"
        )));
    }
    for s in 0..speakers {
        let has_train = manifest
            .split_entries(Split::Train)
            .any(|e| e.speaker == s);
        if !has_train {
            return Err(Error::Manifest(format!(
                "speaker {s} has no training clips"
            )));
        }
    }

    let params = TrainParams {
        manifest: args.manifest.clone(),
        epochs,
        lr,
        batch,
        dropout,
        hop,
        reduced: args.reduced,
        speakers,
        out: args.out.clone(),
    };
    write_run_record(&args.out, "train", Some(seed), &params)?;

    let train_set = snippet_dataset::<f32>(&manifest, Split::Train, hop)?;
    let val_set = snippet_dataset::<f32>(&manifest, Split::Validation, hop)?;
    let arch = if args.reduced {
        Architecture::reduced(speakers)
    } else {
        Architecture::full(speakers)
    };
    let mut model = CnnModel::<f32>::init(arch, seed)?;
    let cfg = TrainConfig {
        learning_rate: lr,
        batch_size: batch,
        epochs,
        seed,
        dropout_rate: dropout,
    };
    let stats = sgd_train(&mut model, &train_set, &val_set, &cfg)?;
    if verbose {
        for s in &stats {
            eprintln!(
                "epoch {}: train loss {:.6}, train acc {:.3}, val acc {:.3}",
                s.epoch, s.train_loss, s.train_acc, s.val_acc
            );
        }
    }

    let model_path = args.out.join("model.voxcnn");
    save_model(&model, &model_path)?;
    let mut csv = String::from("epoch,train_loss,train_acc,val_acc\n");
    for s in &stats {
        csv.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            s.epoch, s.train_loss, s.train_acc, s.val_acc
        ));
    }
    write_text(&args.out.join("metrics.csv"), &csv)?;

    let last = stats.last().expect("epochs is validated positive");
    println!(
        "trained {} model on {speakers} speakers for {epochs} epochs: train acc {:.3}, val acc {:.3}",
        if args.reduced { "reduced" } else { "full" },
        last.train_acc,
        last.val_acc,
    );
    println!("wrote {}", model_path.display());
    Ok(())
}

#[derive(Args)]
pub struct EmbedArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Input WAV clip.
    #[arg(long)]
    input: PathBuf,
    /// Window hop in seconds.
    #[arg(long, env = "VOX_HOP")]
    hop: Option<f64>,
    /// Output directory.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct EmbedParams {
    model: PathBuf,
    input: PathBuf,
    hop: f64,
    out: PathBuf,
}

pub fn cmd_embed(args: EmbedArgs, file: &FileConfig) -> Result<()> {
    let hop = file.f64(args.hop, "hop", 1.0)?;
    let params = EmbedParams {
        model: args.model.clone(),
        input: args.input.clone(),
        hop,
        out: args.out.clone(),
    };
    write_run_record(&args.out, "embed", None, &params)?;

    let model = load_model(&args.model)?;
    let clip = load_clip(&args.input)?;
    let set = embed_clip(&model, &clip, hop)?;
    set.save(&args.out.join("embeddings.f32"))?;
    set.write_csv(&args.out.join("embeddings.csv"))?;
    println!(
        "embedded {} windows of dim {} from {}",
        set.len(),
        set.dim(),
        args.input.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct DiarizeArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Input WAV clip.
    #[arg(long)]
    input: PathBuf,
    /// Force this speaker count instead of estimating it.
    #[arg(short, long)]
    k: Option<usize>,
    /// Also write dendrogram.svg, pca.svg, and tsne.svg.
    #[arg(long)]
    viz: bool,
    /// t-SNE perplexity for --viz; clamped default when omitted.
    #[arg(long, env = "VOX_PERPLEXITY")]
    perplexity: Option<f64>,
    /// t-SNE iterations for --viz.
    #[arg(long, env = "VOX_ITERS")]
    iters: Option<usize>,
    /// Seed for the t-SNE layout.
    #[arg(long, env = "VOX_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct DiarizeParams {
    model: PathBuf,
    input: PathBuf,
    k: Option<usize>,
    viz: bool,
    perplexity: Option<f64>,
    iters: usize,
    out: PathBuf,
}

pub fn cmd_diarize(args: DiarizeArgs, file: &FileConfig) -> Result<()> {
    let perplexity = file.f64_opt(args.perplexity, "perplexity")?;
    let iters = file.usize(args.iters, "iters", DEFAULT_TSNE_ITERS)?;
    let seed = file.u64(args.seed, "seed", 42)?;
    let params = DiarizeParams {
        model: args.model.clone(),
        input: args.input.clone(),
        k: args.k,
        viz: args.viz,
        perplexity,
        iters,
        out: args.out.clone(),
    };
    write_run_record(&args.out, "diarize", Some(seed), &params)?;

    let model = load_model(&args.model)?;
    let clip = load_clip(&args.input)?;
    let result = diarize(&model, &clip, args.k)?;

    write_text(
        &args.out.join("segments.rttm"),
        &result.to_rttm(&stem(&args.input)),
    )?;
    write_text(&args.out.join("diarization.json"), &result.to_json()?)?;

    if args.viz {
        let set = embed_clip(&model, &clip, 1.0)?;
        let dendro = agglomerate(&set)?;
        write_text(&args.out.join("dendrogram.svg"), &dendrogram_svg(&dendro)?)?;
        let labels = cut(&dendro, CutTarget::Count(result.num_speakers))?.labels;
        let pca = pca_project(&set)?;
        write_text(&args.out.join("pca.svg"), &scatter_svg(&pca, Some(&labels))?)?;
        let perplexity = perplexity.unwrap_or_else(|| default_perplexity(set.len()));
        let (tsne, _) = tsne_project(&set, perplexity, iters, seed)?;
        write_text(
            &args.out.join("tsne.svg"),
            &scatter_svg(&tsne, Some(&labels))?,
        )?;
    }

    println!(
        "{} speakers, {} segments{}",
        result.num_speakers,
        result.segments.len(),
        if result.degenerate_estimate {
            " (degenerate estimate: no significant merge gap)"
        } else {
            ""
        }
    );
    for seg in &result.segments {
        println!(
            "  {:8.3} - {:8.3}  spk{}",
            seg.start, seg.end, seg.speaker
        );
    }
    println!("wrote {}", args.out.join("segments.rttm").display());
    Ok(())
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum Space {
    /// Train the ensemble on raw embeddings.
    Full,
    /// Debug mode: train on a joint 2-D t-SNE projection instead.
    Tsne,
}

#[derive(Args)]
pub struct IdentifyArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Enrollment manifest CSV, or a directory containing manifest.csv.
    #[arg(long)]
    enroll: Option<PathBuf>,
    /// Load a previously saved ensemble instead of enrolling.
    #[arg(long, conflicts_with = "enroll")]
    svm: Option<PathBuf>,
    /// Save the trained ensemble to this path.
    #[arg(long)]
    save_svm: Option<PathBuf>,
    /// Query WAV clip.
    #[arg(long)]
    query: PathBuf,
    /// Hinge penalty weight.
    #[arg(long, env = "VOX_C")]
    c: Option<f64>,
    /// Subgradient epochs per class pair.
    #[arg(long, env = "VOX_SVM_EPOCHS")]
    svm_epochs: Option<usize>,
    /// Window hop in seconds.
    #[arg(long, env = "VOX_HOP")]
    hop: Option<f64>,
    /// Seed for the pair shuffles (and the t-SNE layout in --space tsne).
    #[arg(long, env = "VOX_SEED")]
    seed: Option<u64>,
    /// Feature space the ensemble is trained in.
    #[arg(long, value_enum, default_value = "full")]
    space: Space,
    /// Output directory.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct IdentifyParams {
    model: PathBuf,
    enroll: Option<PathBuf>,
    svm: Option<PathBuf>,
    save_svm: Option<PathBuf>,
    query: PathBuf,
    c: f64,
    svm_epochs: usize,
    hop: f64,
    space: &'static str,
    out: PathBuf,
}

/// Embeds every manifest clip and stacks the windows into one labeled set.
fn enrollment_set(
    manifest: &CorpusManifest,
    model: &CnnModel<f32>,
    hop: f64,
) -> Result<EmbeddingSet> {
    let mut dim = 0;
    let mut vectors = Vec::new();
    let mut times = Vec::new();
    let mut refs = Vec::new();
    let mut labels = Vec::new();
    for entry in &manifest.entries {
        let clip = load_clip(&entry.path)?;
        let set = embed_clip(model, &clip, hop)?;
        dim = set.dim();
        for row in 0..set.len() {
            vectors.extend_from_slice(set.vector(row));
            times.push(set.window_times()[row]);
            refs.push(set.clip_refs()[row].clone());
            labels.push(entry.speaker);
        }
    }
    EmbeddingSet::new(dim, vectors, times, refs, Some(labels))
}

/// Rows `0..n` of a projection as a flat f32 matrix.
fn coords_f32(points: &[[f64; 2]]) -> Vec<f32> {
    points
        .iter()
        .flat_map(|p| [p[0] as f32, p[1] as f32])
        .collect()
}

pub fn cmd_identify(args: IdentifyArgs, file: &FileConfig) -> Result<()> {
    let c = file.f64(args.c, "c", 1.0)?;
    let svm_epochs = file.usize(args.svm_epochs, "svm_epochs", 50)?;
    let hop = file.f64(args.hop, "hop", 1.0)?;
    let seed = file.u64(args.seed, "seed", 42)?;
    if args.space == Space::Tsne && (args.svm.is_some() || args.save_svm.is_some()) {
        return Err(Error::Config(
            "--space tsne trains in a query-dependent projection; \
             it cannot load or save an ensemble"
                .into(),
        ));
    }
    if args.enroll.is_none() && args.svm.is_none() {
        return Err(Error::Config(
            "one of --enroll or --svm is required".into(),
        ));
    }

    let params = IdentifyParams {
        model: args.model.clone(),
        enroll: args.enroll.clone(),
        svm: args.svm.clone(),
        save_svm: args.save_svm.clone(),
        query: args.query.clone(),
        c,
        svm_epochs,
        hop,
        space: match args.space {
            Space::Full => "full",
            Space::Tsne => "tsne",
        },
        out: args.out.clone(),
    };
    write_run_record(&args.out, "identify", Some(seed), &params)?;

    let model = load_model(&args.model)?;
    let query_clip = load_clip(&args.query)?;
    let query_set = embed_clip(&model, &query_clip, hop)?;

    let enroll_manifest = match &args.enroll {
        Some(path) => {
            let manifest_path = if path.is_dir() {
                path.join("manifest.csv")
            } else {
                path.clone()
            };
            Some(CorpusManifest::load(manifest_path)?)
        }
        None => None,
    };

    let decisions: Vec<(f64, usize, usize)> = match args.space {
        Space::Full => {
            let ensemble = match &args.svm {
                Some(path) => SvmEnsemble::load(path)?,
                None => {
                    let enroll = enrollment_set(
                        enroll_manifest.as_ref().expect("checked above"),
                        &model,
                        hop,
                    )?;
                    train_ensemble(&enroll, c, svm_epochs, seed)?
                }
            };
            if let Some(path) = &args.save_svm {
                ensemble.save(path)?;
                println!("wrote {}", path.display());
            }
            (0..query_set.len())
                .map(|row| {
                    let (winner, votes) = identify(&ensemble, query_set.vector(row))?;
                    Ok((query_set.window_times()[row], winner, votes[winner]))
                })
                .collect::<Result<_>>()?
        }
        Space::Tsne => {
            let enroll = enrollment_set(
                enroll_manifest.as_ref().expect("checked above"),
                &model,
                hop,
            )?;
            let labels = enroll.labels().expect("enrollment set is labeled").to_vec();
            let total = enroll.len() + query_set.len();
            let mut vectors = Vec::with_capacity(total * enroll.dim());
            let mut times = Vec::with_capacity(total);
            let mut refs = Vec::with_capacity(total);
            for set in [&enroll, &query_set] {
                for row in 0..set.len() {
                    vectors.extend_from_slice(set.vector(row));
                    times.push(set.window_times()[row]);
                    refs.push(set.clip_refs()[row].clone());
                }
            }
            let combined = EmbeddingSet::new(enroll.dim(), vectors, times, refs, None)?;
            let perplexity = default_perplexity(total);
            let (proj, _) = tsne_project(&combined, perplexity, DEFAULT_TSNE_ITERS, seed)?;

            let enroll_2d = EmbeddingSet::new(
                2,
                coords_f32(&proj.points[..enroll.len()]),
                enroll.window_times().to_vec(),
                enroll.clip_refs().to_vec(),
                Some(labels),
            )?;
            let ensemble = train_ensemble(&enroll_2d, c, svm_epochs, seed)?;
            proj.points[enroll.len()..]
                .iter()
                .enumerate()
                .map(|(row, p)| {
                    let coords = [p[0] as f32, p[1] as f32];
                    let (winner, votes) = identify(&ensemble, &coords)?;
                    Ok((query_set.window_times()[row], winner, votes[winner]))
                })
                .collect::<Result<_>>()?
        }
    };

    let mut csv = String::from("time,speaker,votes\n");
    for (time, speaker, votes) in &decisions {
        csv.push_str(&format!("{time:.2},{speaker},{votes}\n"));
    }
    write_text(&args.out.join("identities.csv"), &csv)?;

    let num_classes = decisions.iter().map(|d| d.1).max().unwrap_or(0) + 1;
    let mut tally = vec![0usize; num_classes];
    for d in &decisions {
        tally[d.1] += 1;
    }
    let majority = (0..num_classes).max_by_key(|&s| (tally[s], usize::MAX - s));
    if let Some(speaker) = majority {
        println!(
            "majority speaker {speaker} ({}/{} windows)",
            tally[speaker],
            decisions.len()
        );
    }
    println!("wrote {}", args.out.join("identities.csv").display());
    Ok(())
}

#[derive(Args)]
pub struct VizArgs {
    /// Embedding matrix blob written by `vox embed` (sidecar found next to it).
    #[arg(long)]
    embeddings: PathBuf,
    /// t-SNE perplexity; clamped default when omitted.
    #[arg(long, env = "VOX_PERPLEXITY")]
    perplexity: Option<f64>,
    /// t-SNE iterations.
    #[arg(long, env = "VOX_ITERS")]
    iters: Option<usize>,
    /// Seed for the t-SNE layout.
    #[arg(long, env = "VOX_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct VizParams {
    embeddings: PathBuf,
    perplexity: Option<f64>,
    iters: usize,
    out: PathBuf,
}

pub fn cmd_viz(args: VizArgs, file: &FileConfig) -> Result<()> {
    let perplexity = file.f64_opt(args.perplexity, "perplexity")?;
    let iters = file.usize(args.iters, "iters", DEFAULT_TSNE_ITERS)?;
    let seed = file.u64(args.seed, "seed", 42)?;
    let params = VizParams {
        embeddings: args.embeddings.clone(),
        perplexity,
        iters,
        out: args.out.clone(),
    };
    write_run_record(&args.out, "viz", Some(seed), &params)?;

    let set = EmbeddingSet::load(&args.embeddings)?;
    let labels = set.labels();

    let dendro = agglomerate(&set)?;
    write_text(&args.out.join("dendrogram.svg"), &dendrogram_svg(&dendro)?)?;

    let pca = pca_project(&set)?;
    write_text(&args.out.join("pca.svg"), &scatter_svg(&pca, labels)?)?;
    write_text(&args.out.join("pca.csv"), &projection_csv(&pca, labels)?)?;

    let perplexity = perplexity.unwrap_or_else(|| default_perplexity(set.len()));
    let (tsne, _) = tsne_project(&set, perplexity, iters, seed)?;
    write_text(&args.out.join("tsne.svg"), &scatter_svg(&tsne, labels)?)?;
    write_text(&args.out.join("tsne.csv"), &projection_csv(&tsne, labels)?)?;

    println!("rendered {} rows to {}", set.len(), args.out.display());
    Ok(())
}
