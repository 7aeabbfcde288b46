use std::path::PathBuf;
use std::process::Command;

fn header_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header_dir().join("poseforge.h")).unwrap();
    for sym in [
        "typedef struct PfScene PfScene;",
        "typedef struct PfMesh PfMesh;",
        "PF_STATUS_BEHIND_CAMERA = 4",
        "pf_project_world(",
        "pf_scene_render_png(",
        "pf_pose_export(",
        "pf_last_error_message(",
        "pf_buffer_free(",
    ] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = tempfile_dir();
    let src = dir.join("use.c");
    std::fs::write(
        &src,
        r#"#include "poseforge.h"
int demo(void) {
    PfIntrinsics k = {500.0, 500.0, 32.0, 24.0, 64, 48};
    PfTransform m = {{1,0,0,0, 0,1,0,0, 0,0,1,100, 0,0,0,1}};
    PfVec3 p = {0.0, 0.0, 0.0};
    PfPixel px;
    PfScene *scene = NULL;
    PfBuffer png;
    if (pf_project_world(&k, &m, p, &px) != PF_STATUS_OK) return 1;
    if (pf_scene_new(&k, &scene) != PF_STATUS_OK) return (int)pf_last_error_message()[0];
    if (pf_scene_render_png(scene, PF_CAMERA_ORIGINAL, 0, &png) == PF_STATUS_OK) pf_buffer_free(png);
    pf_scene_free(scene);
    return 0;
}
"#,
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-c", "-o"])
        .arg(dir.join("use.o"))
        .arg("-I")
        .arg(header_dir())
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "cc rejected the header"),
        Err(e) => eprintln!("skipping: no C compiler ({e})"),
    }
    let _ = std::fs::remove_dir_all(dir);
}

fn tempfile_dir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("pf-header-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
