use std::collections::BTreeSet;

use geovqa_core::config::PipelineConfig;
use geovqa_core::fixture::write_miniworld;
use geovqa_core::pipeline::{self, Artifacts};

fn miniworld(seed: u64) -> (tempfile::TempDir, PipelineConfig) {
    let dir = tempfile::tempdir().unwrap();
    let path = write_miniworld(dir.path(), seed).unwrap();
    (dir, PipelineConfig::from_file(&path).unwrap())
}

#[test]
fn full_pipeline_on_miniworld() {
    let (_dir, cfg) = miniworld(7);
    cfg.validate().unwrap();
    let stats = pipeline::run_all(&cfg).unwrap();
    assert_eq!(stats.images, 21);
    assert_eq!(stats.question_types, 21, "{:?}", stats.per_subtype);
    let art = Artifacts::new(cfg.output());
    let table: pipeline::PatchTable = geovqa_core::json::read_json(&art.patches()).unwrap();
    assert!(table.patches.iter().all(|p| p.ms.as_ref().map(|w| w.scene.as_str()) == Some("ms_2021_07")));
    let windows: pipeline::SarWindows = geovqa_core::json::read_json(&art.sar_windows()).unwrap();
    assert_eq!(windows.windows.len(), 21);
    let ids: BTreeSet<_> = table.patches.iter().map(|p| p.patch.id.clone()).collect();
    assert_eq!(ids.len(), 21);
}
