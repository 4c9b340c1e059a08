use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use atp_core::heatmap::HeatmapDoc;
use atp_core::ingest::{self, DatasetSummary, PolarityLabel, ReviewInstance, Span};
use atp_core::model::{self, load_checkpoint, save_checkpoint, EncodedInstance, ModelDims};
use atp_core::position::PositionKind;
use atp_core::train::{self, TrainConfig};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::CliError;

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn load_data(path: &Path) -> Result<Vec<ReviewInstance>, CliError> {
    Ok(ingest::read_dataset(open(path)?)?)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.to_path_buf(),
        source,
    }
}

pub fn ingest(xml: &Path, conllu: &Path, out: &Path) -> Result<(), CliError> {
    let doc = ingest::parse_semeval_xml(&read_text(xml)?).map_err(atp_core::Error::from)?;
    let trees = ingest::parse_conllu(&read_text(conllu)?).map_err(atp_core::Error::from)?;
    let instances = ingest::build_dataset_from(&doc, trees).map_err(atp_core::Error::from)?;
    let mut w = create(out)?;
    ingest::write_dataset(&mut w, &instances).map_err(io_err(out))?;
    w.flush().map_err(io_err(out))?;
    let summary = DatasetSummary::new(&doc, &instances);
    println!("{}", serde_json::to_string(&summary).expect("summary serialises"));
    Ok(())
}

pub struct TrainArgs<'a> {
    pub data: &'a Path,
    pub dev: Option<&'a Path>,
    pub config: Option<&'a Path>,
    pub overrides: &'a [String],
    pub embeddings: Option<&'a Path>,
    pub out: &'a Path,
    pub log: Option<&'a Path>,
}

fn build_config(path: Option<&Path>, overrides: &[String]) -> Result<TrainConfig, CliError> {
    let mut config = match path {
        Some(p) => TrainConfig::parse(&read_text(p)?).map_err(atp_core::Error::from)?,
        None => TrainConfig::default(),
    };
    for (i, kv) in overrides.iter().enumerate() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        config
            .set(k.trim(), v.trim(), i + 1)
            .map_err(|e| CliError::Usage(format!("--set {kv}: {e}")))?;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let config = build_config(args.config, args.overrides)?;
    let all = load_data(args.data)?;
    let (train_set, dev_set) = match args.dev {
        Some(p) => (all, load_data(p)?),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            train::split_dev(&all, config.dev_fraction, &mut rng)
        }
    };
    info!(
        "majority baseline: {:.4}",
        train::majority_baseline(&train_set, if dev_set.is_empty() { &train_set } else { &dev_set })
    );

    let pretrained = match args.embeddings {
        Some(p) => {
            let keep: HashSet<String> = train_set
                .iter()
                .flat_map(|i| i.tree.forms())
                .map(|f| if config.lowercase { f.to_lowercase() } else { f.to_string() })
                .collect();
            let pre = model::load_pretrained(open(p)?, Some(&keep)).map_err(atp_core::Error::from)?;
            info!("{} pretrained vectors of dimension {}", pre.vectors.len(), pre.dim);
            Some(pre)
        }
        None => None,
    };

    let mut log = match args.log {
        Some(p) => Some(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(io_err(p))?,
        ),
        None => None,
    };
    let mut log_err = None;
    let outcome = train::train(&config, &train_set, &dev_set, pretrained.as_ref(), |r| {
        let line = serde_json::to_string(r).expect("report serialises");
        println!("{line}");
        if let Some(f) = log.as_mut() {
            if let Err(e) = writeln!(f, "{line}") {
                log_err.get_or_insert(e);
            }
        }
    })?;
    if let (Some(e), Some(p)) = (log_err, args.log) {
        return Err(io_err(p)(e));
    }
    info!("best epoch {}", outcome.best_epoch);
    save_checkpoint(args.out, &config, &outcome.params)?;
    Ok(())
}

pub fn eval(data: &Path, ckpt: &Path, as_json: bool) -> Result<(), CliError> {
    let ck = load_checkpoint(ckpt)?;
    let data = load_data(data)?;
    let ev = train::evaluate(&ck.params, &ck.config, &data)?;
    if as_json {
        println!("{}", serde_json::to_string(&ev).expect("evaluation serialises"));
        return Ok(());
    }
    println!("instances       {}", ev.total);
    println!("accuracy        {:.4}", ev.accuracy);
    println!("macro accuracy  {:.4}", ev.macro_accuracy);
    for label in PolarityLabel::ALL {
        match ev.per_class[label.code()] {
            Some(a) => println!("  {:<9} {a:.4}", label.as_str()),
            None => println!("  {:<9} -", label.as_str()),
        }
    }
    println!("confusion (rows gold, columns predicted)");
    for label in PolarityLabel::ALL {
        let row: Vec<String> = ev.confusion[label.code()].iter().map(|c| format!("{c:>6}")).collect();
        println!("  {:<9}{}", label.as_str(), row.join(""));
    }
    Ok(())
}

fn pick_tree(conllu: &Path, sentence: usize) -> Result<ingest::DepTree, CliError> {
    let trees = ingest::parse_conllu(&read_text(conllu)?).map_err(atp_core::Error::from)?;
    let n = trees.len();
    if sentence == 0 || sentence > n {
        return Err(CliError::Usage(format!("--sentence {sentence} outside 1..={n}")));
    }
    Ok(trees.into_iter().nth(sentence - 1).expect("checked above"))
}

fn instance(tree: ingest::DepTree, span: Span) -> Result<ReviewInstance, CliError> {
    let id = tree.sent_id().unwrap_or("sentence").to_string();
    let n = tree.len();
    ReviewInstance::new(id, tree, span, PolarityLabel::Neutral)
        .map_err(|_| CliError::Usage(format!("span {span} outside sentence of {n} tokens")))
}

pub fn predict(ckpt: &Path, conllu: &Path, span: Span, sentence: usize) -> Result<(), CliError> {
    let ck = load_checkpoint(ckpt)?;
    let inst = instance(pick_tree(conllu, sentence)?, span)?;
    let pv = ck.config.position.compute(&inst, ck.config.d_max).map_err(atp_core::Error::from)?;
    let enc = EncodedInstance::new(ck.params.vocab(), &inst, &pv, ck.config.aspect_pooling, inst.tree.len())?;
    let pred = model::predict(&ck.params, &enc)?;
    let probs: serde_json::Map<String, serde_json::Value> = PolarityLabel::ALL
        .iter()
        .map(|l| (l.as_str().to_string(), json!(pred.probs[l.code()])))
        .collect();
    let out = json!({
        "sentence_id": inst.sentence_id,
        "aspect": inst.aspect_forms().collect::<Vec<_>>().join(" "),
        "label": pred.label.as_str(),
        "probs": probs,
        "tokens": inst.tree.forms().collect::<Vec<_>>(),
        "alpha": pred.alpha,
    });
    println!("{out}");
    Ok(())
}

pub fn attn_export(ckpt: &Path, data: &Path, ids: &[String], out: &Path) -> Result<(), CliError> {
    let ck = load_checkpoint(ckpt)?;
    let data = load_data(data)?;
    let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
    let selected: Vec<&ReviewInstance> = data
        .iter()
        .filter(|i| wanted.is_empty() || wanted.contains(i.sentence_id.as_str()))
        .collect();
    if selected.is_empty() {
        return Err(CliError::Data("no instances match the requested ids".into()));
    }
    fs::create_dir_all(out).map_err(io_err(out))?;
    for inst in selected {
        let pv = ck.config.position.compute(inst, ck.config.d_max).map_err(atp_core::Error::from)?;
        let enc = EncodedInstance::new(ck.params.vocab(), inst, &pv, ck.config.aspect_pooling, inst.tree.len())?;
        let pred = model::predict(&ck.params, &enc)?;
        let doc = HeatmapDoc::new(
            inst.sentence_id.clone(),
            inst.tree.forms().map(String::from).collect(),
            pred.alpha,
            inst.aspect_span,
            pred.label,
            Some(inst.label),
        )
        .map_err(CliError::Data)?;
        let path = out.join(format!("{}.html", doc.file_stem()));
        fs::write(&path, doc.render_html()).map_err(io_err(&path))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn parse_dims(dims_arg: &str) -> Result<(ModelDims, usize), CliError> {
    let mut dims = ModelDims {
        d_e: 8,
        d_h: 5,
        d_p: 3,
        d_w: 7,
        ..ModelDims::default()
    };
    let mut t_x = 6;
    for part in dims_arg.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || CliError::Usage(format!("--dims: cannot parse {part:?}"));
        let (k, v) = part.split_once('=').ok_or_else(bad)?;
        let v: usize = v.trim().parse().map_err(|_| bad())?;
        match k.trim() {
            "d_e" => dims.d_e = v,
            "d_h" => dims.d_h = v,
            "d_p" => dims.d_p = v,
            "d_w" => dims.d_w = v,
            "d_max" => dims.clamp = v,
            "t" | "t_x" => t_x = v,
            _ => return Err(bad()),
        }
    }
    Ok((dims, t_x))
}

pub fn gradcheck(dims_arg: &str, seed: u64, eps: f64, tol: f64) -> Result<(), CliError> {
    let (dims, t_x) = parse_dims(dims_arg)?;
    let report = model::gradcheck_model(dims, t_x, seed, eps, tol).map_err(|e| CliError::Usage(e.to_string()))?;
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Numeric(format!(
            "gradient check failed: max relative error {:.3e} above {tol:e}",
            report.max_error()
        )))
    }
}

pub fn distance(conllu: &Path, span: Span, sentence: usize, kind: PositionKind, clamp: usize) -> Result<(), CliError> {
    let inst = instance(pick_tree(conllu, sentence)?, span)?;
    let pv = kind.compute(&inst, clamp).map_err(atp_core::Error::from)?;
    println!("{pv}");
    Ok(())
}
