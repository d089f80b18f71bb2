use std::collections::BTreeSet;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use skelres_core::augment::{augment_all_tagged, eval_view, AugmentPolicy};
use skelres_core::dataset::{
    make_split, parse_corpus_excluding, read_exclusion_list, CorpusLayout, DatasetId, Experiment,
    ProtocolSpec, SkeletonSequence, SplitRule, Subset,
};
use skelres_core::encoder::{encode as encode_sequence, PartMap};
use skelres_core::harness::{
    encode_corpus, evaluate as evaluate_model, format_percent, load_results, report as write_report,
    run_protocol, split_data, train as train_model, write_atomic, ExperimentResult, ProtocolOptions,
    RunConfig, SplitData, RESULT_FILE,
};
use skelres_core::nn::Checkpoint;
use skelres_core::raster::Image;
use skelres_core::resnet::{ResNet, ResNetConfig};
use skelres_core::Error;

use crate::manifest::{self, ManifestRow, MANIFEST_FILE};
use crate::{
    AugmentArgs, ConfigArgs, DatasetArg, EncodeArgs, EvaluateArgs, ExperimentArg, Failure, PolicyArg,
    ProtocolArgs, ReportArgs, SplitArgs, TrainArgs, TrainingArgs,
};

type CmdResult = Result<(), Failure>;

fn dataset_id(d: DatasetArg) -> DatasetId {
    match d {
        DatasetArg::Msr3d => DatasetId::Msr3d,
        DatasetArg::Kard => DatasetId::Kard,
    }
}

fn experiment(e: ExperimentArg) -> Experiment {
    match e {
        ExperimentArg::A => Experiment::A,
        ExperimentArg::B => Experiment::B,
        ExperimentArg::C => Experiment::C,
    }
}

fn policy(p: PolicyArg) -> AugmentPolicy {
    match p {
        PolicyArg::Full => AugmentPolicy::full(),
        PolicyArg::Crops => AugmentPolicy::crops_only(),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Usage(e.to_string())),
        None => Ok(RunConfig::default()),
    }
}

fn run_config(cfg: &ConfigArgs) -> Result<RunConfig, Failure> {
    let mut run = load_config(cfg.config.as_deref())?;
    if let Some(p) = &cfg.part_map {
        run.part_map = Some(p.clone());
    }
    if let Some(p) = &cfg.exclusions {
        run.exclusion_list = Some(p.clone());
    }
    Ok(run)
}

fn apply_training(run: &mut RunConfig, t: &TrainingArgs) -> CmdResult {
    if let Some(d) = t.depth {
        run.depth = d;
    }
    if let Some(s) = t.seed {
        run.train.seed = s;
    }
    if let Some(e) = t.epochs {
        run.train.epochs = e;
    }
    if let Some(b) = t.batch_size {
        run.train.batch_size = b;
    }
    if let Some(p) = t.policy {
        run.train.augment_policy = policy(p);
    }
    run.train.validate()?;
    ResNetConfig::new(run.depth, 8, 0).validate()?;
    Ok(())
}

fn part_map(run: &RunConfig, dataset: DatasetId) -> Result<PartMap, Failure> {
    match &run.part_map {
        Some(p) => Ok(PartMap::load(p)?),
        None => Ok(PartMap::default_for(dataset)),
    }
}

fn load_corpus(data: &Path, dataset: DatasetId, run: &RunConfig) -> Result<Vec<SkeletonSequence>, Failure> {
    let exclusions = match &run.exclusion_list {
        Some(p) => read_exclusion_list(p, dataset)?,
        None => BTreeSet::new(),
    };
    let parsed = parse_corpus_excluding(data, &CorpusLayout::for_dataset(dataset), &exclusions)?;
    let r = &parsed.report;
    for d in &r.diagnostics {
        eprintln!("warning: {}: {}", d.path.display(), d.message);
    }
    eprintln!(
        "parsed {} sequences ({} invalid, {} excluded, {} unreadable)",
        parsed.sequences.len(),
        r.invalid.len(),
        r.excluded.len(),
        r.diagnostics.len()
    );
    Ok(parsed.sequences)
}

fn parse_subset(text: &str, dataset: DatasetId) -> Result<Subset, Failure> {
    let subset: Subset = text.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
    if subset.dataset() != dataset {
        return Err(Failure::Usage(format!("subset {subset} does not belong to {dataset}")));
    }
    Ok(subset)
}

fn protocol_spec(subset: Subset, exp: Option<Experiment>, run: &RunConfig) -> Result<ProtocolSpec, Failure> {
    match (subset.dataset(), exp) {
        (DatasetId::Msr3d, None) => Ok(ProtocolSpec {
            split_rule: SplitRule::CrossSubject {
                training_subjects: run.split.training_subjects.clone(),
            },
            ..ProtocolSpec::cross_subject(subset)
        }),
        (DatasetId::Msr3d, Some(_)) => Err(Failure::Usage("--experiment applies to kard only".into())),
        (DatasetId::Kard, Some(e)) => Ok(ProtocolSpec::kard_experiment(
            subset,
            e,
            run.split.kard_repeats,
            run.split.split_seed,
        )),
        (DatasetId::Kard, None) => Err(Failure::Usage("kard needs --experiment A|B|C".into())),
    }
}

fn create_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir).map_err(|e| {
        Failure::Core(Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
    })
}

pub fn encode(args: EncodeArgs) -> CmdResult {
    let dataset = dataset_id(args.dataset);
    let run = run_config(&args.cfg)?;
    let pm = part_map(&run, dataset)?;
    let corpus = load_corpus(&args.data, dataset, &run)?;
    create_dir(&args.out)?;
    let mut rows = Vec::with_capacity(corpus.len());
    for seq in &corpus {
        let id = seq.id();
        let img = encode_sequence(seq, &pm)?;
        let name = PathBuf::from(format!("{}.png", id.stem()));
        img.save_png(&args.out.join(&name))?;
        let split_role = match dataset {
            DatasetId::Msr3d if run.split.training_subjects.contains(&id.subject) => "train",
            DatasetId::Msr3d => "test",
            DatasetId::Kard => "random",
        };
        rows.push(ManifestRow {
            image_path: name,
            id,
            split_role: split_role.into(),
            variant: None,
        });
    }
    write_atomic(&args.out.join(MANIFEST_FILE), manifest::render(&rows).as_bytes())?;
    println!("encoded {} sequences into {}", rows.len(), args.out.display());
    Ok(())
}

pub fn augment(args: AugmentArgs) -> CmdResult {
    let dataset = dataset_id(args.dataset);
    let run = load_config(args.config.as_deref())?;
    let policy = args.policy.map(policy).unwrap_or(run.train.augment_policy);
    policy.validate()?;
    let rows = manifest::parse(&args.manifest, dataset)?;
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    create_dir(&args.out)?;
    let mut out_rows = Vec::new();
    for (index, row) in rows.iter().enumerate() {
        let img = Image::load_png(&base.join(&row.image_path))?;
        let views: Vec<(String, Image)> = if row.split_role == "test" {
            vec![("center".to_string(), eval_view(&img)?)]
        } else {
            augment_all_tagged(&img, &policy, index as u64)?
                .into_iter()
                .map(|(v, im)| (v.to_string(), im))
                .collect()
        };
        for (variant, view) in views {
            let name = PathBuf::from(format!("{}_{variant}.png", row.id.stem()));
            view.save_png(&args.out.join(&name))?;
            out_rows.push(ManifestRow {
                image_path: name,
                id: row.id,
                split_role: row.split_role.clone(),
                variant: Some(variant),
            });
        }
    }
    write_atomic(&args.out.join(MANIFEST_FILE), manifest::render(&out_rows).as_bytes())?;
    println!("wrote {} views of {} images into {}", out_rows.len(), rows.len(), args.out.display());
    Ok(())
}

struct Prepared {
    proto: ProtocolSpec,
    data: SplitData,
}

fn prepare_split(args: &SplitArgs, run: &RunConfig) -> Result<Prepared, Failure> {
    let dataset = dataset_id(args.dataset);
    let subset = parse_subset(&args.subset, dataset)?;
    let proto = protocol_spec(subset, args.experiment.map(experiment), run)?;
    let corpus = load_corpus(&args.data, dataset, run)?;
    let splits = make_split(&corpus, &proto)?;
    let split = splits.get(args.split).ok_or_else(|| {
        Failure::Usage(format!("split {} out of range: protocol has {}", args.split, splits.len()))
    })?;
    let members: Vec<SkeletonSequence> = corpus.into_iter().filter(|s| subset.contains(s.id().action)).collect();
    let encoded = encode_corpus(&members, &part_map(run, dataset)?)?;
    let data = split_data(&encoded, &proto, split, &run.train)?;
    Ok(Prepared { proto, data })
}

pub fn train(args: TrainArgs) -> CmdResult {
    let mut run = run_config(&args.cfg)?;
    apply_training(&mut run, &args.training)?;
    let Prepared { proto, data } = prepare_split(&args.split, &run)?;
    let seed = run.train.seed.wrapping_add(args.split.split as u64);
    let mut model = ResNet::build(ResNetConfig::new(run.depth, proto.subset.action_ids().len(), seed))?;
    let config = skelres_core::TrainConfig { seed, ..run.train.clone() };
    eprintln!("training depth {} on {} views of {}", run.depth, data.train.len(), proto.label());
    let history = train_model(&mut model, &data.train, &config, &mut |_, s| {
        eprintln!(
            "epoch {:>4}  lr {:<8} loss {:.4}  train error {}%",
            s.epoch,
            s.learning_rate,
            s.mean_loss,
            format_percent(s.train_error)
        );
        Ok(ControlFlow::Continue(()))
    })?;

    create_dir(&args.out)?;
    let mut ckpt = model.to_checkpoint();
    ckpt.meta.insert("dataset".into(), proto.dataset().to_string());
    ckpt.meta.insert("protocol".into(), proto.label());
    ckpt.meta.insert("split".into(), args.split.split.to_string());
    let ckpt_path = args.out.join("model.ckpt");
    ckpt.save(&ckpt_path)?;
    let mut csv = String::from("epoch,learning_rate,loss,train_error\n");
    for s in &history {
        csv.push_str(&format!("{},{},{},{}\n", s.epoch, s.learning_rate, s.mean_loss, s.train_error));
    }
    write_atomic(&args.out.join("curve.csv"), csv.as_bytes())?;
    println!("checkpoint written to {}", ckpt_path.display());
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> CmdResult {
    let run = run_config(&args.cfg)?;
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let mut model = ResNet::from_checkpoint(&ckpt)?;
    let Prepared { proto, data } = prepare_split(&args.split, &run)?;
    if model.num_classes() != proto.subset.action_ids().len() {
        return Err(Failure::Core(Error::Checkpoint(format!(
            "checkpoint has {} classes, {} has {}",
            model.num_classes(),
            proto.subset,
            proto.subset.action_ids().len()
        ))));
    }
    let eval = evaluate_model(&mut model, &data.test)?;
    let json = serde_json::json!({
        "protocol": proto.label(),
        "split": args.split.split,
        "accuracy": eval.accuracy,
        "correct": eval.correct,
        "total": eval.total,
        "confusion_matrix": eval.confusion,
    });
    if let Some(out) = &args.out {
        create_dir(out)?;
        let text = serde_json::to_string_pretty(&json).expect("json") + "\n";
        write_atomic(&out.join("evaluation.json"), text.as_bytes())?;
    }
    println!(
        "{}: accuracy {}% ({}/{})",
        proto.label(),
        format_percent(eval.accuracy),
        eval.correct,
        eval.total
    );
    Ok(())
}

pub fn protocol(args: ProtocolArgs) -> CmdResult {
    let dataset = dataset_id(args.dataset);
    let mut run = run_config(&args.cfg)?;
    apply_training(&mut run, &args.training)?;
    let subsets = match &args.subset {
        Some(s) => vec![parse_subset(s, dataset)?],
        None => Subset::all_for(dataset).to_vec(),
    };
    let experiments: Vec<Option<Experiment>> = match (dataset, args.experiment) {
        (DatasetId::Msr3d, None) => vec![None],
        (DatasetId::Msr3d, Some(_)) => return Err(Failure::Usage("--experiment applies to kard only".into())),
        (DatasetId::Kard, Some(e)) => vec![Some(experiment(e))],
        (DatasetId::Kard, None) => Experiment::ALL.iter().copied().map(Some).collect(),
    };
    let corpus = load_corpus(&args.data, dataset, &run)?;
    let options = ProtocolOptions {
        part_map: part_map(&run, dataset)?,
        out_dir: Some(args.out.clone()),
        test_curve: run.test_curve,
    };
    let mut results = Vec::new();
    for &subset in &subsets {
        for &exp in &experiments {
            let proto = protocol_spec(subset, exp, &run)?;
            eprintln!("running {} at depth {}", proto.label(), run.depth);
            let result = run_protocol(&corpus, &proto, run.depth, &run.train, &options)?;
            println!(
                "{}: mean accuracy {}% over {} split(s)",
                proto.label(),
                format_percent(result.mean_accuracy),
                result.per_split_accuracy.len()
            );
            results.push(result);
        }
    }
    let files = write_report(&results, &args.out.join("report"))?;
    println!("report written to {}", files.comparison.display());
    Ok(())
}

fn collect_result_files(path: &Path, found: &mut Vec<PathBuf>) -> CmdResult {
    if path.is_file() {
        found.push(path.to_path_buf());
        return Ok(());
    }
    let entries = std::fs::read_dir(path).map_err(|e| {
        Failure::Core(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })?;
    let mut children: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    children.sort();
    for child in children {
        if child.is_dir() {
            collect_result_files(&child, found)?;
        } else if child.file_name().is_some_and(|n| n == RESULT_FILE) {
            found.push(child);
        }
    }
    Ok(())
}

pub fn report(args: ReportArgs) -> CmdResult {
    let mut files = Vec::new();
    for p in &args.results {
        collect_result_files(p, &mut files)?;
    }
    let mut results: Vec<ExperimentResult> = Vec::new();
    for f in &files {
        results.extend(load_results(f)?);
    }
    if results.is_empty() {
        return Err(Failure::Core(Error::Data("no result files found".into())));
    }
    let written = write_report(&results, &args.out)?;
    println!("{} result(s) reported in {}", results.len(), written.comparison.display());
    Ok(())
}
