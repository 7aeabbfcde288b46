//! Headless z-buffered silhouette rasterizer.
//!
//! Coverage is sampled at pixel centers `(x + 0.5, y + 0.5)` with a top-left
//! tie rule. Depth is perspective-correct camera-frame z. Triangles crossing
//! the near plane are clipped; back faces are not culled. Output is a pure
//! function of the scene, independent of the number of worker threads.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, Mat4, RigidTransform, Vec3};
use crate::imaging::{self, ImageError, Rgb, RgbImage};
use crate::scene::{effective_transform_with_pose, CameraSelect, MeshAsset, ObjectId, Scene, NEAR_PLANE};

pub const LIME: Rgb = [0, 255, 0];
pub const MAGENTA: Rgb = [255, 0, 255];
/// Opacity of comparison overlays over the background.
pub const COMPARISON_ALPHA: f64 = 0.6;

const BAND_ROWS: usize = 16;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("no pose for object {0} in one of the pose maps")]
    MissingPose(ObjectId),
    #[error("object {0} is not in the scene")]
    UnknownObject(ObjectId),
    #[error("mask sizes differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderOptions {
    /// Worker threads; `None` uses the global pool, `Some(1)` renders inline.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthBuffer {
    pub width: u32,
    pub height: u32,
    /// Camera-frame z in mm; `+∞` where nothing was drawn.
    pub depth: Vec<f64>,
}

impl DepthBuffer {
    pub fn at(&self, x: u32, y: u32) -> f64 {
        self.depth[y as usize * self.width as usize + x as usize]
    }
}

/// Per-pixel index into the scene's object list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectMask {
    pub width: u32,
    pub height: u32,
    pub ids: Vec<Option<u32>>,
}

impl ObjectMask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, ids: vec![None; width as usize * height as usize] }
    }

    pub fn at(&self, x: u32, y: u32) -> Option<u32> {
        self.ids[y as usize * self.width as usize + x as usize]
    }

    pub fn covered(&self) -> usize {
        self.ids.iter().filter(|i| i.is_some()).count()
    }

    /// 16-bit grayscale PNG holding `index + 1` (0 for empty pixels).
    pub fn to_png(&self) -> Result<Vec<u8>, ImageError> {
        let values: Vec<u16> = self
            .ids
            .iter()
            .map(|id| id.map_or(0, |i| u16::try_from(i + 1).unwrap_or(u16::MAX)))
            .collect();
        imaging::encode_gray16_png(self.width, self.height, &values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayFrame {
    pub image: RgbImage,
    pub mask: ObjectMask,
    pub depth: DepthBuffer,
    /// Scene object ids, indexed by mask value.
    pub object_ids: Vec<ObjectId>,
}

impl OverlayFrame {
    pub fn object_at(&self, x: u32, y: u32) -> Option<&ObjectId> {
        self.mask.at(x, y).map(|i| &self.object_ids[i as usize])
    }
}

/// One mesh to draw: the full model→view matrix and its layer index.
pub struct DrawItem<'a> {
    pub mesh: &'a MeshAsset,
    pub model_view: Mat4,
    pub layer: u32,
}

pub fn rasterize(scene: &Scene, camera: CameraSelect) -> OverlayFrame {
    rasterize_with(scene, camera, &RenderOptions::default()).expect("default render options")
}

pub fn rasterize_with(scene: &Scene, camera: CameraSelect, opts: &RenderOptions) -> Result<OverlayFrame, RenderError> {
    let view = scene.camera_pose(camera).to_mat4();
    let items: Vec<DrawItem<'_>> = scene
        .objects()
        .iter()
        .enumerate()
        .filter(|(_, o)| o.visible)
        .map(|(i, o)| DrawItem {
            mesh: &o.mesh,
            model_view: view.mul(&effective_transform_with_pose(o, &o.pose)),
            layer: i as u32,
        })
        .collect();
    let (mask, depth) = rasterize_items(scene.intrinsics(), &items, opts)?;
    let mut image = scene.background().clone();
    let objects = scene.objects();
    for (i, id) in mask.ids.iter().enumerate() {
        if let Some(layer) = id {
            let obj = &objects[*layer as usize];
            blend_pixel(&mut image.as_raw_mut()[i * 3..i * 3 + 3], obj.color, obj.opacity);
        }
    }
    Ok(OverlayFrame {
        image,
        mask,
        depth,
        object_ids: objects.iter().map(|o| o.id.clone()).collect(),
    })
}

/// `out = (1−α)·bg + α·color` in 0–1, quantized round-half-up.
fn blend_pixel(px: &mut [u8], color: Rgb, alpha: f64) {
    for (c, o) in px.iter_mut().zip(color) {
        let v = (1.0 - alpha) * (f64::from(*c) / 255.0) + alpha * (f64::from(o) / 255.0);
        *c = (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8;
    }
}

#[derive(Debug, Clone, Copy)]
struct ScreenTri {
    p: [[f64; 2]; 3],
    inv_z: [f64; 3],
    inv_area: f64,
    layer: u32,
    y_min: usize,
    y_max: usize,
    x_min: usize,
    x_max: usize,
}

/// Rasterizes draw items into a layer mask and depth buffer.
pub fn rasterize_items(
    k: &CameraIntrinsics,
    items: &[DrawItem<'_>],
    opts: &RenderOptions,
) -> Result<(ObjectMask, DepthBuffer), RenderError> {
    let (w, h) = (k.width as usize, k.height as usize);
    let tris = setup_triangles(k, items);
    let bands = h.div_ceil(BAND_ROWS);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); bands];
    for (i, t) in tris.iter().enumerate() {
        for bin in &mut bins[t.y_min / BAND_ROWS..=t.y_max / BAND_ROWS] {
            bin.push(i as u32);
        }
    }

    let mut depth = vec![f64::INFINITY; w * h];
    let mut ids: Vec<Option<u32>> = vec![None; w * h];
    let work = |(band, (d, m)): (usize, (&mut [f64], &mut [Option<u32>]))| {
        fill_band(&tris, &bins[band], band * BAND_ROWS, w, d, m);
    };
    let chunk = BAND_ROWS * w.max(1);
    match opts.threads {
        Some(1) => depth
            .chunks_mut(chunk)
            .zip(ids.chunks_mut(chunk))
            .enumerate()
            .for_each(work),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RenderError::ThreadPool(e.to_string()))?;
            pool.install(|| {
                depth
                    .par_chunks_mut(chunk)
                    .zip(ids.par_chunks_mut(chunk))
                    .enumerate()
                    .for_each(work)
            });
        }
        None => depth
            .par_chunks_mut(chunk)
            .zip(ids.par_chunks_mut(chunk))
            .enumerate()
            .for_each(work),
    }

    Ok((
        ObjectMask { width: k.width, height: k.height, ids },
        DepthBuffer { width: k.width, height: k.height, depth },
    ))
}

fn fill_band(tris: &[ScreenTri], bin: &[u32], y0: usize, w: usize, depth: &mut [f64], ids: &mut [Option<u32>]) {
    let rows = depth.len() / w.max(1);
    let y1 = y0 + rows;
    for &ti in bin {
        let t = &tris[ti as usize];
        let ya = t.y_min.max(y0);
        let yb = (t.y_max + 1).min(y1);
        for y in ya..yb {
            let py = y as f64 + 0.5;
            let row = (y - y0) * w;
            for x in t.x_min..=t.x_max {
                let px = x as f64 + 0.5;
                let Some(z) = sample(t, px, py) else { continue };
                let slot = row + x;
                if z < depth[slot] {
                    depth[slot] = z;
                    ids[slot] = Some(t.layer);
                }
            }
        }
    }
}

/// Depth at a pixel center if it is covered by `t`.
#[inline]
fn sample(t: &ScreenTri, px: f64, py: f64) -> Option<f64> {
    let e0 = edge(t.p[1], t.p[2], px, py);
    let e1 = edge(t.p[2], t.p[0], px, py);
    let e2 = edge(t.p[0], t.p[1], px, py);
    if !(inside(e0, t.p[1], t.p[2]) && inside(e1, t.p[2], t.p[0]) && inside(e2, t.p[0], t.p[1])) {
        return None;
    }
    let inv_z = (e0 * t.inv_z[0] + e1 * t.inv_z[1] + e2 * t.inv_z[2]) * t.inv_area;
    Some(1.0 / inv_z)
}

/// Edge function; positive on the interior side of a positively wound
/// triangle.
#[inline]
fn edge(a: [f64; 2], b: [f64; 2], px: f64, py: f64) -> f64 {
    (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0])
}

/// Top-left rule for y-down screens: an on-edge sample belongs to the edge
/// if it is a left edge (dy < 0) or a flat top edge (dy = 0, dx > 0).
#[inline]
fn inside(e: f64, a: [f64; 2], b: [f64; 2]) -> bool {
    if e > 0.0 {
        return true;
    }
    if e < 0.0 {
        return false;
    }
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

fn setup_triangles(k: &CameraIntrinsics, items: &[DrawItem<'_>]) -> Vec<ScreenTri> {
    let mut out = Vec::new();
    let mut cam = Vec::new();
    let mut poly: Vec<Vec3> = Vec::with_capacity(4);
    for item in items {
        cam.clear();
        cam.extend(item.mesh.vertices().iter().map(|v| item.model_view.transform_point(*v)));
        for tri in item.mesh.triangles() {
            let v = [cam[tri[0] as usize], cam[tri[1] as usize], cam[tri[2] as usize]];
            let front = v.iter().filter(|p| p.z >= NEAR_PLANE).count();
            match front {
                0 => continue,
                3 => push_screen_tri(k, v, item.layer, &mut out),
                _ => {
                    clip_near(&v, &mut poly);
                    for i in 1..poly.len().saturating_sub(1) {
                        push_screen_tri(k, [poly[0], poly[i], poly[i + 1]], item.layer, &mut out);
                    }
                }
            }
        }
    }
    out
}

/// Sutherland–Hodgman against `z >= NEAR_PLANE`.
fn clip_near(v: &[Vec3; 3], out: &mut Vec<Vec3>) {
    out.clear();
    for i in 0..3 {
        let a = v[i];
        let b = v[(i + 1) % 3];
        let a_in = a.z >= NEAR_PLANE;
        let b_in = b.z >= NEAR_PLANE;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let s = (NEAR_PLANE - a.z) / (b.z - a.z);
            let mut p = a + (b - a) * s;
            p.z = NEAR_PLANE;
            out.push(p);
        }
    }
}

fn push_screen_tri(k: &CameraIntrinsics, v: [Vec3; 3], layer: u32, out: &mut Vec<ScreenTri>) {
    let mut p = [[0.0; 2]; 3];
    let mut inv_z = [0.0; 3];
    for i in 0..3 {
        let z = v[i].z;
        p[i] = [k.fx * v[i].x / z + k.cx, k.fy * v[i].y / z + k.cy];
        inv_z[i] = 1.0 / z;
    }
    let mut area = edge(p[0], p[1], p[2][0], p[2][1]);
    if !area.is_finite() || area == 0.0 {
        return;
    }
    if area < 0.0 {
        p.swap(1, 2);
        inv_z.swap(1, 2);
        area = -area;
    }
    let (w, h) = (f64::from(k.width), f64::from(k.height));
    let min_x = p[0][0].min(p[1][0]).min(p[2][0]);
    let max_x = p[0][0].max(p[1][0]).max(p[2][0]);
    let min_y = p[0][1].min(p[1][1]).min(p[2][1]);
    let max_y = p[0][1].max(p[1][1]).max(p[2][1]);
    // Pixel x is sampled when min_x <= x + 0.5 <= max_x.
    let lo_x = (min_x - 0.5).ceil().max(0.0);
    let hi_x = (max_x - 0.5).floor().min(w - 1.0);
    let lo_y = (min_y - 0.5).ceil().max(0.0);
    let hi_y = (max_y - 0.5).floor().min(h - 1.0);
    if !(lo_x <= hi_x && lo_y <= hi_y) {
        return;
    }
    out.push(ScreenTri {
        p,
        inv_z,
        inv_area: 1.0 / area,
        layer,
        x_min: lo_x as usize,
        x_max: hi_x as usize,
        y_min: lo_y as usize,
        y_max: hi_y as usize,
    });
}

/// Result of the annotated-vs-ground-truth overlay.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub image: RgbImage,
    pub lime_only: usize,
    pub magenta_only: usize,
    pub overlap: usize,
}

/// Silhouettes under the annotated poses in lime and under ground truth in
/// magenta, seen from the original camera. Overlap pixels get the 50/50 mix.
pub fn render_comparison(
    scene: &Scene,
    annotated: &BTreeMap<ObjectId, RigidTransform>,
    ground_truth: &BTreeMap<ObjectId, RigidTransform>,
) -> Result<Comparison, RenderError> {
    for id in annotated.keys() {
        if !ground_truth.contains_key(id) {
            return Err(RenderError::MissingPose(id.clone()));
        }
    }
    for id in ground_truth.keys() {
        if !annotated.contains_key(id) {
            return Err(RenderError::MissingPose(id.clone()));
        }
    }
    let k = scene.intrinsics();
    let coverage = |poses: &BTreeMap<ObjectId, RigidTransform>| -> Result<ObjectMask, RenderError> {
        let mut items = Vec::with_capacity(poses.len());
        for (id, pose) in poses {
            let idx = scene.index_of(id).ok_or_else(|| RenderError::UnknownObject(id.clone()))?;
            let obj = &scene.objects()[idx];
            items.push(DrawItem {
                mesh: &obj.mesh,
                model_view: effective_transform_with_pose(obj, pose),
                layer: idx as u32,
            });
        }
        Ok(rasterize_items(k, &items, &RenderOptions::default())?.0)
    };
    let a = coverage(annotated)?;
    let b = coverage(ground_truth)?;
    let mix = [
        (u16::from(LIME[0]) + u16::from(MAGENTA[0])).div_ceil(2) as u8,
        (u16::from(LIME[1]) + u16::from(MAGENTA[1])).div_ceil(2) as u8,
        (u16::from(LIME[2]) + u16::from(MAGENTA[2])).div_ceil(2) as u8,
    ];
    let mut image = scene.background().clone();
    let (mut lime_only, mut magenta_only, mut overlap) = (0, 0, 0);
    for (i, (ia, ib)) in a.ids.iter().zip(&b.ids).enumerate() {
        let color = match (ia.is_some(), ib.is_some()) {
            (true, true) => {
                overlap += 1;
                mix
            }
            (true, false) => {
                lime_only += 1;
                LIME
            }
            (false, true) => {
                magenta_only += 1;
                MAGENTA
            }
            (false, false) => continue,
        };
        blend_pixel(&mut image.as_raw_mut()[i * 3..i * 3 + 3], color, COMPARISON_ALPHA);
    }
    Ok(Comparison { image, lime_only, magenta_only, overlap })
}

/// Highlights where two silhouettes disagree and returns `|A△B| / |A∪B|`
/// (0 when both are empty).
pub fn render_difference(annotated: &ObjectMask, gt: &ObjectMask) -> Result<(RgbImage, f64), RenderError> {
    if (annotated.width, annotated.height) != (gt.width, gt.height) {
        return Err(RenderError::DimensionMismatch {
            a: (annotated.width, annotated.height),
            b: (gt.width, gt.height),
        });
    }
    let mut image = RgbImage::new(annotated.width, annotated.height, [0, 0, 0]);
    let (mut sym, mut union) = (0usize, 0usize);
    for (i, (a, b)) in annotated.ids.iter().zip(&gt.ids).enumerate() {
        let color = match (a.is_some(), b.is_some()) {
            (true, true) => [96, 96, 96],
            (true, false) => LIME,
            (false, true) => MAGENTA,
            (false, false) => continue,
        };
        union += 1;
        if a.is_some() != b.is_some() {
            sym += 1;
        }
        image.as_raw_mut()[i * 3..i * 3 + 3].copy_from_slice(&color);
    }
    let ratio = if union == 0 { 0.0 } else { sym as f64 / union as f64 };
    Ok((image, ratio))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::DisplayUpdate;

    fn k64() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 32.0, 32.0, 64, 64).unwrap()
    }

    fn quad(id: &str, half: f64) -> MeshAsset {
        let v = vec![
            Vec3::new(-half, -half, 0.0),
            Vec3::new(half, -half, 0.0),
            Vec3::new(half, half, 0.0),
            Vec3::new(-half, half, 0.0),
        ];
        MeshAsset::new(id, id, v, vec![[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    fn scene_with(objs: &[(&str, f64, f64)]) -> Scene {
        let mut s = Scene::blank(k64()).unwrap();
        for (id, half, z) in objs {
            let oid = s.add_object(quad(id, *half)).unwrap();
            s.set_pose(&oid, RigidTransform::from_translation(Vec3::new(0.0, 0.0, *z))).unwrap();
        }
        s
    }

    #[test]
    fn empty_scene_is_background() {
        let s = Scene::blank(k64()).unwrap();
        let f = rasterize(&s, CameraSelect::Original);
        assert_eq!(&f.image, s.background());
        assert_eq!(f.mask.covered(), 0);
        assert!(f.depth.depth.iter().all(|d| d.is_infinite()));
    }

    #[test]
    fn quad_covers_expected_pixels() {
        // Half-size 10 mm at 500 mm with f=500 spans 10 px each way: u ∈ [22, 42].
        let s = scene_with(&[("q", 10.0, 500.0)]);
        let f = rasterize(&s, CameraSelect::Original);
        assert_eq!(f.mask.covered(), 400);
        assert_eq!(f.mask.at(22, 22), Some(0));
        assert_eq!(f.mask.at(41, 41), Some(0));
        assert_eq!(f.mask.at(42, 30), None);
        assert_eq!(f.mask.at(21, 30), None);
        assert!((f.depth.at(30, 30) - 500.0).abs() < 1e-9);
        assert_eq!(f.image.get(30, 30), s.objects()[0].color);
    }

    #[test]
    fn nearer_object_wins() {
        let s = scene_with(&[("far", 10.0, 600.0), ("near", 6.0, 400.0)]);
        let f = rasterize(&s, CameraSelect::Original);
        assert_eq!(f.object_at(32, 32), Some(&"near".into()));
        assert!((f.depth.at(32, 32) - 400.0).abs() < 1e-9);
    }

    #[test]
    fn depth_tie_goes_to_lower_index() {
        let s = scene_with(&[("a", 10.0, 500.0), ("b", 10.0, 500.0)]);
        let f = rasterize(&s, CameraSelect::Original);
        assert!(f.mask.ids.iter().flatten().all(|&i| i == 0));
    }

    #[test]
    fn opacity_extremes() {
        let mut s = scene_with(&[("q", 10.0, 500.0)]);
        let id: ObjectId = "q".into();
        s.set_display(&id, &DisplayUpdate { opacity: Some(0.0), ..Default::default() }).unwrap();
        let f = rasterize(&s, CameraSelect::Original);
        assert_eq!(&f.image, s.background());
        assert_eq!(f.mask.covered(), 400);
        s.set_display(&id, &DisplayUpdate { opacity: Some(0.5), ..Default::default() }).unwrap();
        let f = rasterize(&s, CameraSelect::Original);
        let c = s.objects()[0].color;
        let px = f.image.get(30, 30);
        for ch in 0..3 {
            let expected = ((0.5 * 128.0 / 255.0 + 0.5 * f64::from(c[ch]) / 255.0) * 255.0 + 0.5).floor() as u8;
            assert_eq!(px[ch], expected);
        }
    }

    #[test]
    fn behind_camera_contributes_nothing() {
        let s = scene_with(&[("q", 10.0, -500.0)]);
        assert_eq!(rasterize(&s, CameraSelect::Original).mask.covered(), 0);
    }

    #[test]
    fn near_plane_crossing_is_clipped_not_dropped() {
        let v = vec![Vec3::new(-50.0, -5.0, -100.0), Vec3::new(50.0, -5.0, 200.0), Vec3::new(0.0, 40.0, 200.0)];
        let mut s = Scene::blank(k64()).unwrap();
        s.add_object(MeshAsset::new("t", "t", v, vec![[0, 1, 2]]).unwrap()).unwrap();
        let f = rasterize(&s, CameraSelect::Original);
        assert!(f.mask.covered() > 0);
        assert!(f.depth.depth.iter().filter(|d| d.is_finite()).all(|&d| d >= NEAR_PLANE - 1e-9));
    }

    #[test]
    fn shared_edge_has_no_gaps_or_double_cover() {
        // The diagonal of the quad passes exactly through pixel centers.
        let s = scene_with(&[("q", 16.0, 500.0)]);
        let f = rasterize(&s, CameraSelect::Original);
        assert_eq!(f.mask.covered(), 32 * 32);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let s = scene_with(&[("a", 12.0, 450.0), ("b", 7.0, 300.0)]);
        let one = rasterize_with(&s, CameraSelect::Original, &RenderOptions { threads: Some(1) }).unwrap();
        let four = rasterize_with(&s, CameraSelect::Original, &RenderOptions { threads: Some(4) }).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn comparison_identical_and_shifted() {
        let s = scene_with(&[("q", 10.0, 500.0)]);
        let id: ObjectId = "q".into();
        let pose = s.get_pose(&id).unwrap();
        let a: BTreeMap<_, _> = [(id.clone(), pose)].into();
        let c = render_comparison(&s, &a, &a).unwrap();
        assert_eq!((c.lime_only, c.magenta_only, c.overlap), (0, 0, 400));
        // Ground truth 10 px (= 10 mm at f=500, z=500) to the right.
        let shifted = RigidTransform::from_translation(Vec3::new(10.0, 0.0, 500.0));
        let g: BTreeMap<_, _> = [(id.clone(), shifted)].into();
        let c = render_comparison(&s, &a, &g).unwrap();
        assert_eq!((c.lime_only, c.magenta_only, c.overlap), (200, 200, 200));
        assert!(c.image.get(23, 30)[1] > c.image.get(23, 30)[0]);
        let missing: BTreeMap<ObjectId, RigidTransform> = BTreeMap::new();
        assert!(matches!(render_comparison(&s, &a, &missing), Err(RenderError::MissingPose(_))));
        let empty = Scene::blank(k64()).unwrap();
        let c = render_comparison(&empty, &missing, &missing).unwrap();
        assert_eq!(&c.image, empty.background());
    }

    #[test]
    fn difference_ratios() {
        let mut a = ObjectMask::empty(10, 10);
        let mut b = ObjectMask::empty(10, 10);
        assert_eq!(render_difference(&a, &b).unwrap().1, 0.0);
        for i in 0..100 {
            b.ids[i] = Some(0);
        }
        for i in 0..50 {
            a.ids[i] = Some(0);
        }
        assert_eq!(render_difference(&a, &b).unwrap().1, 0.5);
        assert_eq!(render_difference(&b, &b).unwrap().1, 0.0);
        let mut c = ObjectMask::empty(10, 10);
        let mut d = ObjectMask::empty(10, 10);
        c.ids[0] = Some(0);
        d.ids[1] = Some(0);
        assert_eq!(render_difference(&c, &d).unwrap().1, 1.0);
        assert!(matches!(
            render_difference(&c, &ObjectMask::empty(3, 3)),
            Err(RenderError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mask_png_encodes_index_plus_one() {
        let s = scene_with(&[("q", 10.0, 500.0)]);
        let f = rasterize(&s, CameraSelect::Original);
        let bytes = f.mask.to_png().unwrap();
        let mut dec = png::Decoder::new(std::io::Cursor::new(bytes));
        dec.set_transformations(png::Transformations::IDENTITY);
        let mut r = dec.read_info().unwrap();
        let mut buf = vec![0; r.output_buffer_size().unwrap()];
        r.next_frame(&mut buf).unwrap();
        let at = |x: usize, y: usize| u16::from_be_bytes([buf[(y * 64 + x) * 2], buf[(y * 64 + x) * 2 + 1]]);
        assert_eq!(at(30, 30), 1);
        assert_eq!(at(0, 0), 0);
    }
}
