use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sve_hdr::corpus::{symmetric_pairs, CorpusManifest, Recipe, SceneEntry, SceneSource};
use sve_hdr::io::report::SUMMARY_SCENE;
use sve_hdr::io::{summarize, ReportEntry};
use sve_hdr::pipeline::Method;
use sve_hdr_cli::{load_evaluations, main_with_args, BranchInfo, Layout, EXIT_INPUT};

fn small_manifest(dir: &Path) -> PathBuf {
    let scenes = [Recipe::GradientChart, Recipe::SpotlightPatches, Recipe::ChromaticShadows]
        .into_iter()
        .map(|recipe| SceneEntry {
            id: format!("{}_s", recipe.name()),
            source: SceneSource::Synthetic { recipe, width: 64, height: 64 },
            ev_pairs: symmetric_pairs(&[1.0, 2.0, 3.0, 4.0]),
        })
        .collect();
    let m = CorpusManifest { seed: 7, scenes };
    let path = dir.join("corpus.json");
    fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("sve-hdr").chain(args.iter().copied()))
}

/// Every file under `dir` with its contents.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn count(dir: &Path, suffix: &str) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(suffix))
        .count()
}

#[test]
fn full_run_layout_and_idempotence() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_manifest(tmp.path());
    let out = tmp.path().join("out");
    let (m, o) = (manifest.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(run(&["all", "-i", m, "-o", o, "--jobs", "2"]), 0);

    let layout = Layout::new(&out);
    assert_eq!(count(&layout.raw(), ".mask.pfm"), 12);
    assert_eq!(count(&layout.raw(), ".json"), 12);
    assert_eq!(count(&layout.recon(), ".png"), 24);
    assert_eq!(count(&layout.recon(), ".branches.json"), 12);
    assert_eq!(count(&layout.eval(), ".json"), 24);
    assert!(layout.report().is_file());
    assert!(layout.manifest().is_file());
    assert_eq!(count(&out, ".partial"), 0);

    let before = snapshot(&out);
    let mtimes: Vec<_> = before
        .keys()
        .map(|k| fs::metadata(out.join(k)).unwrap().modified().unwrap())
        .collect();
    assert_eq!(run(&["all", "-i", m, "-o", o, "--jobs", "2"]), 0);
    assert_eq!(snapshot(&out), before);
    let after: Vec<_> = before
        .keys()
        .map(|k| fs::metadata(out.join(k)).unwrap().modified().unwrap())
        .collect();
    assert_eq!(after, mtimes, "a rerun must not touch existing outputs");
}

#[test]
fn missing_input_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let missing = tmp.path().join("nope.hdr");
    let code = run(&["all", "-i", missing.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_INPUT);
    assert!(!out.exists());

    // A manifest naming a missing file is rejected the same way.
    let manifest = CorpusManifest {
        seed: 0,
        scenes: vec![SceneEntry {
            id: "ghost".into(),
            source: SceneSource::File { path: "ghost.hdr".into() },
            ev_pairs: vec![(-1.0, 1.0)],
        }],
    };
    let mpath = tmp.path().join("m.json");
    fs::write(&mpath, serde_json::to_string(&manifest).unwrap()).unwrap();
    assert_eq!(run(&["simulate", "-i", mpath.to_str().unwrap(), "-o", out.to_str().unwrap()]), EXIT_INPUT);
    assert!(!out.exists());

    // Later stages need earlier outputs.
    assert_eq!(run(&["reconstruct", "-o", out.to_str().unwrap()]), EXIT_INPUT);
    assert_eq!(run(&["report", "-o", out.to_str().unwrap()]), EXIT_INPUT);
}

#[test]
fn bad_arguments_are_input_errors() {
    assert_eq!(run(&["all", "-o", "/tmp/unused", "--ev-pairs", "2:1"]), EXIT_INPUT);
    assert_eq!(run(&["all", "-o", "/tmp/unused", "--bit-depth", "7"]), EXIT_INPUT);
    assert_eq!(run(&["all", "-o", "/tmp/unused", "--jobs", "0"]), EXIT_INPUT);
    assert_eq!(run(&["frobnicate"]), EXIT_INPUT);
}

#[test]
fn report_agrees_with_evaluations_and_branches_add_up() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_manifest(tmp.path());
    let out = tmp.path().join("out");
    let (m, o) = (manifest.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(run(&["all", "-i", m, "-o", o, "--ev-pairs", "1,3"]), 0);
    let layout = Layout::new(&out);
    assert_eq!(count(&layout.raw(), ".mask.pfm"), 6);

    let entries: Vec<ReportEntry> = load_evaluations(&layout).unwrap();
    assert_eq!(entries.len(), 12);
    let table = summarize(&entries).unwrap();
    let mut rdr = csv::Reader::from_path(layout.report()).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, table.header());
    assert_eq!(header[3..], ["±1EV", "±3EV"]);
    let records: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), table.rows.len());
    for (rec, row) in records.iter().zip(&table.rows) {
        assert_eq!((&rec[0], &rec[1], &rec[2]), (row.metric.name(), row.method.name(), row.scene.as_str()));
        for (col, ev) in [1.0, 3.0].into_iter().enumerate() {
            let value = row.values[col].unwrap();
            if row.scene == SUMMARY_SCENE {
                let vals: Vec<f64> = entries
                    .iter()
                    .filter(|e| e.method == row.method && e.ev_high == ev)
                    .filter_map(|e| row.metric.of(&e.report))
                    .collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                assert!((value - mean).abs() < 1e-9, "{:?} {:?} {ev}: {value} vs {mean}", row.metric, row.method);
            }
            assert_eq!(rec[3 + col], format!("{value:.4}"));
        }
    }

    for e in fs::read_dir(layout.recon()).unwrap() {
        let p = e.unwrap().path();
        if p.to_string_lossy().ends_with(".branches.json") {
            let b: BranchInfo = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
            let c = b.branches;
            assert_eq!(c.low + c.high + c.keep + c.achromatic, b.pixel_count);
            assert_eq!(b.pixel_count, 64 * 64);
        }
    }
}

#[test]
fn single_method_and_force() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_manifest(tmp.path());
    let out = tmp.path().join("out");
    let (m, o) = (manifest.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(run(&["all", "-i", m, "-o", o, "--ev-pairs", "2", "--method", "conventional"]), 0);
    let layout = Layout::new(&out);
    assert_eq!(count(&layout.recon(), ".pfm"), 3);
    assert_eq!(count(&layout.recon(), ".branches.json"), 0);
    let before = snapshot(&out);
    assert_eq!(run(&["all", "-i", m, "-o", o, "--ev-pairs", "2", "--method", "conventional", "--force"]), 0);
    assert_eq!(snapshot(&out), before, "forced recomputation is deterministic");
}
