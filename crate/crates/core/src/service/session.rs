use std::collections::VecDeque;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ServiceError;
use crate::geometry::{
    compose, invert, scale_depth, trackball_rotate, translate_in_view_about, GeometryError, PixelCoord,
    RigidTransform,
};
use crate::imaging::RgbImage;
use crate::io::{self, export_pose, import_pose, save_workspace};
use crate::render::{rasterize_with, OverlayFrame, RenderOptions};
use crate::scene::{CameraSelect, DisplayUpdate, ObjectId, Scene, StandardView};
use crate::study::{make_trial_plan, AnnotationRecord, TrialPlan};

/// How many past scene snapshots stay addressable by revision.
pub const SNAPSHOT_DEPTH: usize = 16;

/// Time source for trial durations and record timestamps.
pub trait Clock: Send {
    /// Monotonic seconds since an arbitrary origin.
    fn seconds(&self) -> f64;
    fn wall(&self) -> DateTime<Utc>;
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn seconds(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }

    fn wall(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Clock that only moves when told to; clones share the same time.
#[derive(Clone)]
pub struct ManualClock {
    state: Arc<Mutex<(f64, DateTime<Utc>)>>,
}

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        ManualClock { state: Arc::new(Mutex::new((0.0, start))) }
    }

    pub fn advance(&self, seconds: f64) {
        let mut s = self.state.lock().expect("clock lock");
        s.0 += seconds;
        s.1 += chrono::Duration::nanoseconds((seconds * 1e9).round() as i64);
    }
}

impl Clock for ManualClock {
    fn seconds(&self) -> f64 {
        self.state.lock().expect("clock lock").0
    }

    fn wall(&self) -> DateTime<Utc> {
        self.state.lock().expect("clock lock").1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub revision: u64,
    pub timestamp: DateTime<Utc>,
    pub object: ObjectId,
    pub pose: RigidTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    /// Reloads the current trial's sample with identity poses, or previews
    /// another sample by id. Confirming is refused while previewing.
    LoadSample {
        #[serde(default)]
        sample: Option<String>,
    },
    /// Selects by id, by picking at a pixel, or deselects when both are
    /// absent or the pick misses.
    SelectObject {
        #[serde(default)]
        object: Option<ObjectId>,
        #[serde(default)]
        at: Option<PixelCoord>,
        #[serde(default)]
        camera: CameraSelect,
    },
    GestureRotate {
        start: PixelCoord,
        end: PixelCoord,
        #[serde(default)]
        camera: CameraSelect,
    },
    GestureTranslate {
        start: PixelCoord,
        end: PixelCoord,
        #[serde(default)]
        camera: CameraSelect,
    },
    GestureDepth {
        notches: f64,
        #[serde(default)]
        camera: CameraSelect,
    },
    SetPoseText {
        text: String,
        #[serde(default)]
        object: Option<ObjectId>,
    },
    SetDisplay {
        #[serde(default)]
        object: Option<ObjectId>,
        update: DisplayUpdate,
    },
    SetStandardView {
        view: StandardView,
    },
    ConfirmAnnotation,
    Undo,
    ExportPose {
        #[serde(default)]
        object: Option<ObjectId>,
    },
    SaveWorkspace {
        path: PathBuf,
    },
}

impl Command {
    fn mutates(&self) -> bool {
        !matches!(self, Command::ExportPose { .. } | Command::SaveWorkspace { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPose {
    pub object: ObjectId,
    pub pose: RigidTransform,
}

/// What a command changed, tagged with the revision it produced.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StateDelta {
    pub revision: u64,
    pub sample: String,
    pub cursor: usize,
    pub active: Option<ObjectId>,
    pub poses: Vec<ObjectPose>,
    pub history_len: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub export_text: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub records: Vec<AnnotationRecordView>,
    pub complete: bool,
}

/// Wire form of an [`AnnotationRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecordView {
    pub user: String,
    pub sample: String,
    pub trial: u8,
    pub object: String,
    pub pose: RigidTransform,
    pub duration_s: f64,
    pub timestamp: DateTime<Utc>,
}

impl From<&AnnotationRecord> for AnnotationRecordView {
    fn from(r: &AnnotationRecord) -> Self {
        AnnotationRecordView {
            user: r.user.clone(),
            sample: r.sample.clone(),
            trial: r.trial,
            object: r.object.clone(),
            pose: r.pose,
            duration_s: r.duration_s,
            timestamp: r.timestamp,
        }
    }
}

pub struct SessionConfig {
    pub clock: Box<dyn Clock>,
    /// Confirmed records are appended here as JSON lines.
    pub log_path: Option<PathBuf>,
    pub render: RenderOptions,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig { clock: Box::new(SystemClock::default()), log_path: None, render: RenderOptions::default() }
    }
}

/// A rendered frame and the revision whose scene it shows.
#[derive(Debug, Clone)]
pub struct TaggedFrame {
    pub revision: u64,
    pub camera: CameraSelect,
    pub frame: Arc<OverlayFrame>,
}

pub struct Session {
    id: String,
    user: String,
    root: PathBuf,
    plan: TrialPlan,
    cursor: usize,
    sample: String,
    scene: Arc<Scene>,
    active: Option<ObjectId>,
    history: Vec<HistoryEntry>,
    undo: Vec<(ObjectId, RigidTransform)>,
    revision: u64,
    trial_start: f64,
    records: Vec<AnnotationRecord>,
    snapshots: VecDeque<(u64, Arc<Scene>)>,
    frames: Vec<TaggedFrame>,
    config: SessionConfig,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("user", &self.user)
            .field("cursor", &self.cursor)
            .field("revision", &self.revision)
            .finish_non_exhaustive()
    }
}

/// Builds the trial plan over every sample in `root` and loads the first
/// trial with identity poses.
pub fn start_session(
    id: impl Into<String>,
    root: &Path,
    user: &str,
    seed: u64,
    config: SessionConfig,
) -> Result<Session, ServiceError> {
    let samples = io::list_samples(root).map_err(|e| ServiceError::Layout(e.to_string()))?;
    if samples.is_empty() {
        return Err(ServiceError::Layout(format!("{} holds no samples", root.display())));
    }
    let plan = make_trial_plan(&samples, seed).map_err(|e| ServiceError::Layout(e.to_string()))?;
    let first = plan.entries[0].sample.clone();
    let scene = load_scene(root, &first)?;
    let trial_start = config.clock.seconds();
    let mut s = Session {
        id: id.into(),
        user: user.to_owned(),
        root: root.to_owned(),
        plan,
        cursor: 0,
        sample: first,
        scene: Arc::new(scene),
        active: None,
        history: Vec::new(),
        undo: Vec::new(),
        revision: 0,
        trial_start,
        records: Vec::new(),
        snapshots: VecDeque::new(),
        frames: Vec::new(),
        config,
    };
    s.active = s.scene.objects().first().map(|o| o.id.clone());
    s.push_snapshot();
    Ok(s)
}

/// A dataset sample as a scene: its image as background and every object at
/// the identity pose.
pub fn load_scene(root: &Path, sample: &str) -> Result<Scene, ServiceError> {
    let ds = io::load_sample(root, sample).map_err(layout_or_dataset)?;
    let background = RgbImage::load_png(&ds.image_path).map_err(|e| ServiceError::Layout(e.to_string()))?;
    let mut scene = Scene::new(ds.intrinsics, background)?;
    scene.background_path = Some(ds.image_path.clone());
    for obj in &ds.objects {
        let mesh = ds.load_mesh(obj).map_err(layout_or_dataset)?;
        scene.add_object(mesh)?;
    }
    Ok(scene)
}

fn layout_or_dataset(e: io::DatasetError) -> ServiceError {
    match e {
        io::DatasetError::Layout(m) => ServiceError::Layout(m),
        other => ServiceError::Dataset(other),
    }
}

impl Session {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    pub fn plan(&self) -> &TrialPlan {
        &self.plan
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn is_complete(&self) -> bool {
        self.cursor >= self.plan.len()
    }

    pub fn sample(&self) -> &str {
        &self.sample
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn active(&self) -> Option<&ObjectId> {
        self.active.as_ref()
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    /// Immutable view of the current state for readers.
    pub fn snapshot(&self) -> (u64, Arc<Scene>) {
        (self.revision, Arc::clone(&self.scene))
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    pub fn undo_depth(&self) -> usize {
        self.undo.len()
    }

    /// Applies one command. Failed commands leave the session untouched and
    /// do not consume a revision.
    pub fn apply(&mut self, cmd: Command) -> Result<StateDelta, ServiceError> {
        let mutates = cmd.mutates();
        let mut delta = StateDelta::default();
        match cmd {
            Command::LoadSample { sample } => {
                if self.is_complete() {
                    return Err(ServiceError::SessionComplete);
                }
                let id = sample.unwrap_or_else(|| self.plan.entries[self.cursor].sample.clone());
                self.load(&id)?;
                delta.poses = self.all_poses();
            }
            Command::SelectObject { object, at, camera } => {
                let picked = match (object, at) {
                    (Some(id), _) => {
                        self.scene.object(&id).map_err(|_| ServiceError::UnknownObject(id.clone()))?;
                        Some(id)
                    }
                    (None, Some(px)) => self.scene.pick_object(px, camera)?,
                    (None, None) => None,
                };
                self.active = picked;
            }
            Command::GestureRotate { start, end, camera } => {
                let k = *self.scene.intrinsics();
                delta.poses = self.gesture(camera, |pose, pivot| trackball_rotate(pose, start, end, pivot, &k))?;
            }
            Command::GestureTranslate { start, end, camera } => {
                let k = *self.scene.intrinsics();
                delta.poses =
                    self.gesture(camera, |pose, pivot| translate_in_view_about(pose, start, end, pivot, &k))?;
            }
            Command::GestureDepth { notches, camera } => {
                if !notches.is_finite() {
                    return Err(ServiceError::InvalidCommand(format!("notches must be finite, got {notches}")));
                }
                delta.poses = self.gesture(camera, |pose, pivot| scale_depth(pose, notches, pivot))?;
            }
            Command::SetPoseText { text, object } => {
                let id = self.target(object)?;
                let pose = import_pose(&text).map_err(|e| ServiceError::InvalidCommand(e.to_string()))?;
                self.set_pose(&id, pose)?;
                delta.poses = vec![ObjectPose { object: id, pose }];
            }
            Command::SetDisplay { object, update } => {
                let id = self.target(object)?;
                Arc::make_mut(&mut self.scene).set_display(&id, &update)?;
            }
            Command::SetStandardView { view } => {
                Arc::make_mut(&mut self.scene).set_standard_view(view);
            }
            Command::ConfirmAnnotation => {
                let records = self.confirm()?;
                delta.records = records.iter().map(AnnotationRecordView::from).collect();
                if !self.is_complete() {
                    delta.poses = self.all_poses();
                }
            }
            Command::Undo => {
                let (id, pose) = self
                    .undo
                    .pop()
                    .ok_or_else(|| ServiceError::InvalidCommand("nothing to undo".into()))?;
                Arc::make_mut(&mut self.scene).set_pose(&id, pose)?;
                self.record_history(&id, pose);
                delta.poses = vec![ObjectPose { object: id, pose }];
            }
            Command::ExportPose { object } => {
                let id = self.target(object)?;
                delta.export_text = Some(export_pose(&self.scene.get_pose(&id)?));
            }
            Command::SaveWorkspace { path } => {
                save_workspace(&self.scene, &path)?;
            }
        }
        if mutates {
            self.revision += 1;
            self.push_snapshot();
            // History entries written during this command carry its revision.
            let rev = self.revision;
            for h in self.history.iter_mut().rev().take_while(|h| h.revision == 0) {
                h.revision = rev;
            }
        }
        delta.revision = self.revision;
        delta.sample = self.sample.clone();
        delta.cursor = self.cursor;
        delta.active = self.active.clone();
        delta.history_len = self.history.len();
        delta.complete = self.is_complete();
        Ok(delta)
    }

    /// Renders the scene at `revision` (default: current). Repeated requests
    /// for the same revision and camera return the cached frame.
    pub fn frame(&mut self, camera: CameraSelect, revision: Option<u64>) -> Result<TaggedFrame, ServiceError> {
        let (rev, scene) = self.scene_at(revision)?;
        if let Some(f) = self.frames.iter().find(|f| f.revision == rev && f.camera == camera) {
            return Ok(f.clone());
        }
        let frame = render_snapshot(&scene, camera, &self.config.render)?;
        let tagged = TaggedFrame { revision: rev, camera, frame: Arc::new(frame) };
        self.frames.retain(|f| f.revision + SNAPSHOT_DEPTH as u64 > self.revision);
        self.frames.push(tagged.clone());
        Ok(tagged)
    }

    /// The retained snapshot for `revision` (default: current).
    pub fn scene_at(&self, revision: Option<u64>) -> Result<(u64, Arc<Scene>), ServiceError> {
        let rev = revision.unwrap_or(self.revision);
        self.snapshots
            .iter()
            .find(|(r, _)| *r == rev)
            .map(|(r, s)| (*r, Arc::clone(s)))
            .ok_or(ServiceError::RevisionUnavailable { requested: rev, current: self.revision })
    }

    fn push_snapshot(&mut self) {
        self.snapshots.push_back((self.revision, Arc::clone(&self.scene)));
        while self.snapshots.len() > SNAPSHOT_DEPTH {
            self.snapshots.pop_front();
        }
    }

    fn load(&mut self, sample: &str) -> Result<(), ServiceError> {
        let scene = load_scene(&self.root, sample)?;
        self.active = scene.objects().first().map(|o| o.id.clone());
        self.scene = Arc::new(scene);
        self.sample = sample.to_owned();
        self.undo.clear();
        self.trial_start = self.config.clock.seconds();
        Ok(())
    }

    fn all_poses(&self) -> Vec<ObjectPose> {
        self.scene.objects().iter().map(|o| ObjectPose { object: o.id.clone(), pose: o.pose }).collect()
    }

    fn target(&self, object: Option<ObjectId>) -> Result<ObjectId, ServiceError> {
        let id = object
            .or_else(|| self.active.clone())
            .ok_or_else(|| ServiceError::InvalidCommand("no object selected".into()))?;
        self.scene.object(&id).map_err(|_| ServiceError::UnknownObject(id.clone()))?;
        Ok(id)
    }

    /// Runs a camera-frame gesture on the active object as seen from
    /// `camera` and maps the result back to the object's pose.
    fn gesture(
        &mut self,
        camera: CameraSelect,
        op: impl Fn(&RigidTransform, crate::geometry::Vec3) -> Result<RigidTransform, GeometryError>,
    ) -> Result<Vec<ObjectPose>, ServiceError> {
        let id = self.target(None)?;
        let obj = self.scene.object(&id)?;
        let pivot = obj.pivot();
        let pose = obj.pose;
        let new_pose = match camera {
            CameraSelect::Original => op(&pose, pivot)?,
            CameraSelect::Scene => {
                let cam = self.scene.camera_pose(camera);
                let seen = op(&compose(&cam, &pose), pivot)?;
                compose(&invert(&cam), &seen)
            }
        };
        if new_pose == pose {
            return Ok(Vec::new());
        }
        self.set_pose(&id, new_pose)?;
        Ok(vec![ObjectPose { object: id, pose: new_pose }])
    }

    fn set_pose(&mut self, id: &ObjectId, pose: RigidTransform) -> Result<(), ServiceError> {
        let prev = self.scene.get_pose(id)?;
        Arc::make_mut(&mut self.scene).set_pose(id, pose)?;
        self.undo.push((id.clone(), prev));
        self.record_history(id, pose);
        Ok(())
    }

    fn record_history(&mut self, id: &ObjectId, pose: RigidTransform) {
        self.history.push(HistoryEntry { revision: 0, timestamp: self.config.clock.wall(), object: id.clone(), pose });
    }

    /// One record per object of the current sample, then the next trial.
    fn confirm(&mut self) -> Result<Vec<AnnotationRecord>, ServiceError> {
        if self.is_complete() {
            return Err(ServiceError::SessionComplete);
        }
        let entry = self.plan.entries[self.cursor].clone();
        if entry.sample != self.sample {
            return Err(ServiceError::InvalidCommand(format!(
                "previewing {}, the current trial is {}",
                self.sample, entry.sample
            )));
        }
        let duration_s = self.config.clock.seconds() - self.trial_start;
        let timestamp = self.config.clock.wall();
        let records: Vec<AnnotationRecord> = self
            .scene
            .objects()
            .iter()
            .map(|o| AnnotationRecord {
                user: self.user.clone(),
                sample: entry.sample.clone(),
                trial: entry.repetition,
                object: o.id.as_str().to_owned(),
                pose: o.pose,
                duration_s,
                timestamp,
            })
            .collect();
        if let Some(path) = &self.config.log_path {
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            let mut text = String::new();
            for r in &records {
                text.push_str(&r.to_log_line());
                text.push('\n');
            }
            f.write_all(text.as_bytes())?;
        }
        self.records.extend(records.iter().cloned());
        self.cursor += 1;
        self.undo.clear();
        if !self.is_complete() {
            let next = self.plan.entries[self.cursor].sample.clone();
            self.load(&next)?;
        }
        Ok(records)
    }
}

pub fn render_snapshot(scene: &Scene, camera: CameraSelect, opts: &RenderOptions) -> Result<OverlayFrame, ServiceError> {
    Ok(rasterize_with(scene, camera, opts)?)
}
