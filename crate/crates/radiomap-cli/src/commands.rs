use crate::config::{RunConfig, Stream};
use crate::error::{CliError, CliResult};
use crate::formats::*;
use crate::manifest::Manifest;
use radiomap::propagation::{
    evaluate, evaluate_distance_model, fit_distance_model, generate_measurements_with, predict_many, Metrics, RadioMapModel,
    NMAE_DEFINITION,
};
use radiomap::reconstruction::{fit_model_with, knn_predict_many, reconstruct_with, KNN_DEFAULT_BANDWIDTH, KNN_DEFAULT_K, OPTIMIZER};
use radiomap::relay::{exhaustive_search, place_relay};
use radiomap::scene::generate_scene;
use radiomap::stn::POOLING_VERSION;
use radiomap::{Link, Point3};
use std::path::{Path, PathBuf};

fn resolve(flag: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| CliError::new("usage", format!("no {what} path given on the command line or in [paths]")))
}

fn finish(command: &str, cfg: &RunConfig, inputs: &[&Path], outputs: &[&Path]) -> CliResult<()> {
    let m = Manifest::new(command, cfg, inputs, outputs)?;
    write_text(&Manifest::path_for(outputs[0]), &to_json(&m))
}

pub fn gen_scene(cfg: &RunConfig, out: Option<PathBuf>) -> CliResult<PathBuf> {
    let out = resolve(out, &cfg.paths.map, "map output")?;
    let h = generate_scene(&cfg.scene, cfg.stream_seed(Stream::Scene))?;
    write_text(&out, &map_to_string(&h))?;
    finish("gen-scene", cfg, &[], &[&out])?;
    Ok(out)
}

pub fn gen_data(cfg: &RunConfig, map: Option<PathBuf>, out: Option<PathBuf>) -> CliResult<PathBuf> {
    let map = resolve(map, &cfg.paths.map, "map")?;
    let out = resolve(out, &cfg.paths.data, "data output")?;
    let h = read_map(&map)?;
    let data = generate_measurements_with(
        &h,
        &cfg.path_loss,
        &cfg.vogler,
        &cfg.sampling,
        cfg.measurements,
        cfg.noise_sigma,
        cfg.stream_seed(Stream::Data),
    )?;
    write_text(&out, &measurements_to_string(&data))?;
    finish("gen-data", cfg, &[&map], &[&out])?;
    Ok(out)
}

/// Path stored in the model file: bare file name when the map sits next to
/// the model, otherwise as given.
fn map_reference(model: &Path, map: &Path) -> PathBuf {
    let dir = |p: &Path| p.parent().map(Path::to_path_buf).unwrap_or_default();
    if dir(model) == dir(map) {
        PathBuf::from(map.file_name().unwrap_or_default())
    } else {
        map.to_path_buf()
    }
}

pub fn fit(cfg: &RunConfig, data: Option<PathBuf>, init_map: Option<PathBuf>, out: Option<PathBuf>, out_map: Option<PathBuf>) -> CliResult<PathBuf> {
    let data_path = resolve(data, &cfg.paths.data, "data")?;
    let out = resolve(out, &cfg.paths.model, "model output")?;
    let out_map = match out_map.or_else(|| cfg.paths.fitted_map.clone()) {
        Some(p) => p,
        None => {
            let mut name = out.file_stem().unwrap_or_default().to_os_string();
            name.push("_map.txt");
            out.with_file_name(name)
        }
    };
    let data = read_measurements(&data_path)?;
    let fcfg = cfg.fit_config();
    let (fit, los_fraction) = match &init_map {
        Some(p) => {
            let h = read_map(p)?;
            (fit_model_with(&data, &h, &fcfg, &cfg.vogler, cfg.eccentricity)?, None)
        }
        None => {
            let grid = cfg.scene.grid()?;
            let r = reconstruct_with(&data, &grid, &fcfg, &cfg.vogler, cfg.eccentricity)?;
            let frac = r.cluster.los_fraction();
            (r.fit, Some(frac))
        }
    };
    let map_text = map_to_string(&fit.model.map);
    write_text(&out_map, &map_text)?;
    let file = ModelFile {
        schema: MODEL_SCHEMA.into(),
        map: MapRef {
            path: map_reference(&out, &out_map),
            sha256: crate::config::sha256_hex(map_text.as_bytes()),
        },
        path_loss: fit.model.los,
        scatter: fit.model.scatter.clone(),
        pooling: POOLING_VERSION.into(),
        vogler: fit.model.vogler,
        eccentricity: fit.model.eccentricity,
        indicator: fit.model.indicator,
        nmae_definition: NMAE_DEFINITION.into(),
        training: Training {
            loss: fit.loss,
            epochs_run: fit.epochs_run,
            history: fit.history,
            optimizer: OPTIMIZER.into(),
            los_fraction,
        },
    };
    write_text(&out, &to_json(&file))?;
    let mut inputs: Vec<&Path> = vec![&data_path];
    if let Some(p) = &init_map {
        inputs.push(p);
    }
    finish("fit", cfg, &inputs, &[&out, &out_map])?;
    Ok(out)
}

pub fn heatmap(model: &RadioMapModel, tx: Point3, rx_height: f64) -> CliResult<GridFile> {
    let g = *model.map.grid();
    let mut links = Vec::with_capacity(g.len());
    for r in 0..g.rows {
        for c in 0..g.cols {
            let p = g.cell_center(r, c);
            links.push(Link::new(tx, Point3::new(p.x, p.y, rx_height))?);
        }
    }
    let v = predict_many(&links, model)?;
    Ok(GridFile {
        schema: GRID_SCHEMA.into(),
        rows: g.rows,
        cols: g.cols,
        cell_size: g.cell_size,
        origin: g.origin,
        tx,
        rx_height,
        unit: "dB".into(),
        values: v.chunks(g.cols).map(<[f64]>::to_vec).collect(),
    })
}

pub fn predict(cfg: &RunConfig, model: Option<PathBuf>, out: Option<PathBuf>) -> CliResult<PathBuf> {
    let model_path = resolve(model, &cfg.paths.model, "model")?;
    let out = resolve(out, &cfg.paths.grid, "grid output")?;
    let model = ModelFile::load(&model_path)?;
    let grid = heatmap(&model, cfg.predict.tx, cfg.predict.rx_height)?;
    write_text(&out, &to_json(&grid))?;
    finish("predict", cfg, &[&model_path], &[&out])?;
    Ok(out)
}

pub fn eval(cfg: &RunConfig, model: Option<PathBuf>, data: Option<PathBuf>, train: Option<PathBuf>, out: Option<PathBuf>) -> CliResult<PathBuf> {
    let model_path = resolve(model, &cfg.paths.model, "model")?;
    let data_path = resolve(data, &cfg.paths.data, "data")?;
    let out = resolve(out, &cfg.paths.metrics, "metrics output")?;
    let model = ModelFile::load(&model_path)?;
    let test = read_measurements(&data_path)?;
    let mut file = MetricsFile {
        schema: METRICS_SCHEMA.into(),
        nmae_definition: NMAE_DEFINITION.into(),
        model: evaluate(&model, &test)?,
        distance_baseline: None,
        knn_baseline: None,
    };
    let mut inputs: Vec<&Path> = vec![&model_path, &data_path];
    if let Some(t) = &train {
        let train = read_measurements(t)?;
        let d = fit_distance_model(&train)?;
        file.distance_baseline = Some(evaluate_distance_model(&d, &test)?);
        let links: Vec<Link> = test.iter().map(|m| m.link).collect();
        let y: Vec<f64> = test.iter().map(|m| m.y).collect();
        let k = knn_predict_many(&train, &links, KNN_DEFAULT_K, KNN_DEFAULT_BANDWIDTH)?;
        file.knn_baseline = Some(Metrics::from_pairs(&y, &k)?);
    }
    if let Some(t) = &train {
        inputs.push(t);
    }
    write_text(&out, &to_json(&file))?;
    finish("eval", cfg, &inputs, &[&out])?;
    Ok(out)
}

pub fn relay(cfg: &RunConfig, model: Option<PathBuf>, out: Option<PathBuf>) -> CliResult<PathBuf> {
    let model_path = resolve(model, &cfg.paths.model, "model")?;
    let out = resolve(out, &cfg.paths.relay, "relay output")?;
    let model = ModelFile::load(&model_path)?;
    let q = cfg.relay_query()?;
    let result = place_relay(&q, &model)?;
    let exhaustive = match cfg.relay.exhaustive {
        Some(mode) => Some(ExhaustiveRun {
            mode,
            result: exhaustive_search(&q, &model, mode)?,
        }),
        None => None,
    };
    let file = RelayFile {
        schema: RELAY_SCHEMA.into(),
        query: q,
        result,
        exhaustive,
    };
    write_text(&out, &to_json(&file))?;
    finish("relay", cfg, &[&model_path], &[&out])?;
    Ok(out)
}

/// Splits measurements into leading and trailing parts by fraction.
pub fn split(data_path: &Path, fraction: f64, first: &Path, second: &Path) -> CliResult<()> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(CliError::new("usage", "split fraction must lie in [0, 1]"));
    }
    let data = read_measurements(data_path)?;
    let k = (data.len() as f64 * fraction).round() as usize;
    write_text(first, &measurements_to_string(&data[..k]))?;
    write_text(second, &measurements_to_string(&data[k..]))
}
