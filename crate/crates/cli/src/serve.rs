//! Stateless HTTP service for scene annotation: grid previews, scene
//! validation and background images.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use csec_core::geometry::{CellSize, GridOptions, SceneIssue};
use csec_core::{CalibrationInput, Image, PerspectiveGrid, Point2, SceneSpec};

use crate::error::CliError;

/// Encoded backgrounds of the scenes found at startup, by name.
#[derive(Debug, Default)]
pub struct SceneStore {
    backgrounds: BTreeMap<String, Vec<u8>>,
}

impl SceneStore {
    pub fn insert(&mut self, name: impl Into<String>, background: &Image) {
        self.backgrounds.insert(name.into(), background.encode_png());
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.backgrounds.keys().map(String::as_str)
    }

    /// Loads `<name>.json` files and `<name>/scene.json` directories under
    /// `dir`. Scenes whose background cannot be read are reported in the
    /// second return value and left out.
    pub fn load_dir(dir: &Path) -> Result<(Self, Vec<String>), CliError> {
        let mut store = Self::default();
        let mut skipped = Vec::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| CliError::validation(format!("cannot read {}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for path in entries {
            let (name, file) = if path.is_dir() {
                (path.file_name(), path.join("scene.json"))
            } else if path.extension().is_some_and(|e| e == "json") {
                (path.file_stem(), path.clone())
            } else {
                continue;
            };
            let Some(name) = name.and_then(|n| n.to_str()).map(str::to_string) else { continue };
            if !file.is_file() {
                continue;
            }
            let loaded = SceneSpec::from_file(&file).map_err(|e| e.to_string()).and_then(|scene| {
                let bg = scene.resolve_background(file.parent().unwrap_or(Path::new(".")));
                Image::load_png(&bg).map_err(|e| e.to_string())
            });
            match loaded {
                Ok(img) => store.insert(name, &img),
                Err(e) => skipped.push(format!("{name}: {e}")),
            }
        }
        Ok((store, skipped))
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: String,
}

fn error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": ErrorBody { code, message: message.into() } }))).into_response()
}

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, Box<Response>> {
    serde_json::from_slice(body).map_err(|e| Box::new(error(StatusCode::BAD_REQUEST, "ParseError", e.to_string())))
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GridRequest {
    Wrapped {
        calibration: CalibrationInput,
        #[serde(default)]
        cell_size: CellSize,
    },
    Bare(CalibrationInput),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResponse {
    /// `rows + 1` lines of `cols + 1` image points; line 0 is nearest the
    /// camera.
    pub corners: Vec<Vec<Point2>>,
    pub vanish: Point2,
    pub rows: usize,
    pub cols: usize,
    /// Corner of calibration point `i`, as (row, col).
    pub origin: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateResponse {
    pub ok: bool,
    pub errors: Vec<SceneIssue>,
}

pub fn grid_response(grid: &PerspectiveGrid) -> GridResponse {
    GridResponse {
        corners: grid.corner_rows(),
        vanish: grid.vanish(),
        rows: grid.rows(),
        cols: grid.cols(),
        origin: grid.origin(),
    }
}

async fn post_grid(body: Bytes) -> Response {
    let req: GridRequest = match parse(&body) {
        Ok(r) => r,
        Err(resp) => return *resp,
    };
    let (calibration, cell_size) = match req {
        GridRequest::Wrapped { calibration, cell_size } => (calibration, cell_size),
        GridRequest::Bare(c) => (c, CellSize::default()),
    };
    match PerspectiveGrid::build_with(&calibration, cell_size, GridOptions::default()) {
        Ok(grid) => Json(grid_response(&grid)).into_response(),
        Err(e) => error(StatusCode::BAD_REQUEST, e.code(), e.to_string()),
    }
}

async fn post_validate(body: Bytes) -> Response {
    let scene: SceneSpec = match parse(&body) {
        Ok(s) => s,
        Err(resp) => return *resp,
    };
    let errors = scene.validate();
    Json(ValidateResponse { ok: errors.is_empty(), errors }).into_response()
}

async fn get_background(State(store): State<Arc<SceneStore>>, UrlPath(scene): UrlPath<String>) -> Response {
    match store.backgrounds.get(&scene) {
        Some(png) => ([(header::CONTENT_TYPE, "image/png")], png.clone()).into_response(),
        None => error(StatusCode::NOT_FOUND, "UnknownScene", format!("no scene named {scene:?}")),
    }
}

pub fn router(store: Arc<SceneStore>) -> Router {
    Router::new()
        .route("/grid", post(post_grid))
        .route("/scene/validate", post(post_validate))
        .route("/background/{scene}", get(get_background))
        .with_state(store)
}

/// Serves until the process is stopped.
pub async fn serve(listener: tokio::net::TcpListener, store: SceneStore) -> std::io::Result<()> {
    axum::serve(listener, router(Arc::new(store))).await
}
