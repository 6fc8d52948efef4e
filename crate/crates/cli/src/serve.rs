//! HTTP inference service over an immutable decoder.
//!
//! - `GET /meta`: layout, slider ranges, vertex count, faces, model id
//! - `POST /reconstruct` with `{"values": [...]}`: `{"vertices": [[x, y, z], ...]}`
//! - `GET /health`
//!
//! Vertex coordinates are printed with 9 significant digits, which is
//! enough to recover the decoder's single-precision output exactly.

use std::fmt::Write as _;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Serialize;
use serde_json::Value;
use spectraforge::{DecoderModel, EncodingStats, Segment, SpectralEncoding};

/// Entries below this are rejected as negative.
pub const NEGATIVE_TOLERANCE: f64 = -1e-9;

pub struct ServiceState {
    pub model: DecoderModel,
    pub stats: EncodingStats,
    /// CRC-32 of the checkpoint bytes, hex.
    pub model_id: String,
    meta_json: String,
}

#[derive(Serialize)]
struct Meta<'a> {
    layout: &'a [Segment],
    min: &'a [f64],
    max: &'a [f64],
    n_vertices: usize,
    faces: Option<&'a [[usize; 3]]>,
    model_id: &'a str,
}

impl ServiceState {
    pub fn new(model: DecoderModel, model_id: String) -> spectraforge::Result<Self> {
        let stats = model.meta.stats.clone().ok_or_else(|| {
            spectraforge::Error::Checkpoint("model has no encoding statistics; retrain with `train`".into())
        })?;
        if stats.layout != model.meta.layout {
            return Err(spectraforge::Error::LayoutMismatch);
        }
        let meta_json = serde_json::to_string(&Meta {
            layout: &model.meta.layout,
            min: &stats.min,
            max: &stats.max,
            n_vertices: model.n_vertices(),
            faces: model.meta.faces.as_deref(),
            model_id: &model_id,
        })?;
        Ok(Self {
            model,
            stats,
            model_id,
            meta_json,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> spectraforge::Result<Self> {
        let model = DecoderModel::from_bytes(bytes)?;
        Self::new(model, format!("{:08x}", crc32fast::hash(bytes)))
    }

    pub fn meta_json(&self) -> &str {
        &self.meta_json
    }

    /// Response body for a request body, or a status and message.
    pub fn reconstruct_json(&self, body: &[u8]) -> Result<String, (StatusCode, String)> {
        let bad = |m: String| (StatusCode::BAD_REQUEST, m);
        let v: Value = serde_json::from_slice(body).map_err(|e| bad(format!("invalid JSON: {e}")))?;
        let values = v
            .get("values")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("expected {\"values\": [...]}".into()))?;
        let want_faces = match v.get("faces") {
            None => false,
            Some(f) => f.as_bool().ok_or_else(|| bad("`faces` must be a boolean".into()))?,
        };
        let expected = self.model.input_len();
        if values.len() != expected {
            return Err(bad(format!("expected {expected} values, got {}", values.len())));
        }
        let mut xs = Vec::with_capacity(expected);
        for (i, x) in values.iter().enumerate() {
            match x.as_f64().filter(|f| f.is_finite()) {
                Some(f) => xs.push(f),
                None => return Err(bad(format!("value {i} is not a finite number"))),
            }
        }
        if let Some(i) = xs.iter().position(|&x| x < NEGATIVE_TOLERANCE) {
            return Err((
                StatusCode::UNPROCESSABLE_ENTITY,
                format!("value {i} is negative ({:e})", xs[i]),
            ));
        }
        let enc = SpectralEncoding::new(self.model.meta.layout.clone(), xs).map_err(|e| bad(e.to_string()))?;
        let points = self
            .model
            .predict([&enc])
            .map_err(|e| (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
            .pop()
            .expect("one row");
        let mut out = String::with_capacity(points.len() * 56 + 32);
        out.push_str("{\"vertices\":[");
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            // decoder output is f32; print it at single precision
            let _ = write!(out, "[{:.8e},{:.8e},{:.8e}]", p[0] as f32, p[1] as f32, p[2] as f32);
        }
        out.push(']');
        if want_faces {
            out.push_str(",\"faces\":");
            out.push_str(&serde_json::to_string(&self.model.meta.faces).expect("faces serialize"));
        }
        out.push('}');
        Ok(out)
    }
}

type Shared = Arc<ServiceState>;

fn json(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error(status: StatusCode, msg: String) -> Response {
    (status, json(serde_json::json!({ "error": msg }).to_string())).into_response()
}

async fn meta(State(s): State<Shared>) -> Response {
    json(s.meta_json().to_owned())
}

async fn reconstruct(State(s): State<Shared>, body: Bytes) -> Response {
    let result = tokio::task::spawn_blocking(move || s.reconstruct_json(&body)).await;
    match result {
        Ok(Ok(b)) => json(b),
        Ok(Err((status, msg))) => error(status, msg),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn health() -> &'static str {
    "ok"
}

/// Lets the static explorer page call the service from another origin.
async fn cors(req: Request, next: Next) -> Response {
    let mut res = if req.method() == Method::OPTIONS {
        StatusCode::NO_CONTENT.into_response()
    } else {
        next.run(req).await
    };
    let h = res.headers_mut();
    h.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    h.insert(header::ACCESS_CONTROL_ALLOW_METHODS, HeaderValue::from_static("GET, POST, OPTIONS"));
    h.insert(header::ACCESS_CONTROL_ALLOW_HEADERS, HeaderValue::from_static("content-type"));
    res
}

pub fn router(state: ServiceState) -> Router {
    Router::new()
        .route("/meta", get(meta))
        .route("/reconstruct", post(reconstruct))
        .route("/health", get(health))
        .layer(middleware::from_fn(cors))
        .with_state(Arc::new(state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use axum::body::Body;
    use http_body_util::BodyExt;
    use spectraforge::encoding::{build_encoding, dataset_stats};
    use spectraforge::{init_decoder, Spectrum};
    use tower::ServiceExt;

    fn state() -> (ServiceState, Vec<SpectralEncoding>) {
        let encs: Vec<SpectralEncoding> = (0..4)
            .map(|i| {
                let g = Spectrum::from_values((0..5).map(|j| (j * j + i) as f64 * 0.5).collect());
                let l = Spectrum::from_values((0..4).map(|j| (j + i) as f64).collect());
                build_encoding(&g, &[("front".into(), l)]).unwrap()
            })
            .collect();
        let mut model = init_decoder(&encs[0].layout, &[8, 8], 4, 0.0, 3).unwrap();
        model.meta.faces = Some(vec![[0, 1, 2], [0, 2, 3]]);
        model.meta.stats = Some(dataset_stats(&encs).unwrap());
        let bytes = model.to_bytes();
        (ServiceState::from_bytes(&bytes).unwrap(), encs)
    }

    async fn call(app: Router, method: Method, uri: &str, body: &str) -> (StatusCode, String) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(body.to_owned()))
            .unwrap();
        let res = app.oneshot(req).await.unwrap();
        let status = res.status();
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        (status, String::from_utf8(bytes.to_vec()).unwrap())
    }

    fn body_for(e: &SpectralEncoding) -> String {
        serde_json::json!({ "values": e.values }).to_string()
    }

    #[tokio::test]
    async fn meta_lists_layout_and_ranges() {
        let (s, encs) = state();
        let app = router(s);
        let (status, body) = call(app, Method::GET, "/meta", "").await;
        assert_eq!(status, StatusCode::OK);
        let v: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v["layout"].as_array().unwrap().len(), 2);
        assert_eq!(v["n_vertices"], 4);
        assert_eq!(v["faces"].as_array().unwrap().len(), 2);
        let stats = dataset_stats(&encs).unwrap();
        let min: Vec<f64> = serde_json::from_value(v["min"].clone()).unwrap();
        assert_eq!(min, stats.min);
        assert_eq!(v["model_id"].as_str().unwrap().len(), 8);
    }

    #[tokio::test]
    async fn reconstruct_matches_offline_bit_exactly() {
        let (s, encs) = state();
        let offline = s.model.predict([&encs[1]]).unwrap().pop().unwrap();
        let app = router(s);
        let (status, body) = call(app, Method::POST, "/reconstruct", &body_for(&encs[1])).await;
        assert_eq!(status, StatusCode::OK);
        let v: Value = serde_json::from_str(&body).unwrap();
        assert!(v.get("faces").is_none());
        let served: Vec<f32> = body
            .split(['[', ']', ',', '{', '}', ':'])
            .filter_map(|t| t.parse().ok())
            .collect();
        let expected: Vec<f32> = offline.iter().flatten().map(|&x| x as f32).collect();
        assert_eq!(served.len(), 12);
        assert!(served.iter().zip(&expected).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[tokio::test]
    async fn identical_requests_give_identical_bodies() {
        let (s, encs) = state();
        let app = router(s);
        let body = body_for(&encs[2]);
        let (a, b) = tokio::join!(
            call(app.clone(), Method::POST, "/reconstruct", &body),
            call(app.clone(), Method::POST, "/reconstruct", &body)
        );
        assert_eq!(a, b);
    }

    #[tokio::test]
    async fn faces_on_request() {
        let (s, encs) = state();
        let mut v: Value = serde_json::from_str(&body_for(&encs[0])).unwrap();
        v["faces"] = Value::Bool(true);
        let (status, body) = call(router(s), Method::POST, "/reconstruct", &v.to_string()).await;
        assert_eq!(status, StatusCode::OK);
        assert!(body.contains("\"faces\":[[0,1,2],[0,2,3]]"));
    }

    #[tokio::test]
    async fn bad_requests() {
        let (s, encs) = state();
        let app = router(s);
        let short = serde_json::json!({ "values": &encs[0].values[1..] }).to_string();
        assert_eq!(call(app.clone(), Method::POST, "/reconstruct", &short).await.0, StatusCode::BAD_REQUEST);
        assert_eq!(call(app.clone(), Method::POST, "/reconstruct", "nope").await.0, StatusCode::BAD_REQUEST);
        let mut vals: Vec<Value> = encs[0].values.iter().map(|&x| x.into()).collect();
        vals[0] = Value::String("NaN".into());
        let nan = serde_json::json!({ "values": vals }).to_string();
        assert_eq!(call(app.clone(), Method::POST, "/reconstruct", &nan).await.0, StatusCode::BAD_REQUEST);

        let mut neg = encs[0].values.clone();
        neg[3] = -1e-3;
        let body = serde_json::json!({ "values": neg }).to_string();
        assert_eq!(call(app.clone(), Method::POST, "/reconstruct", &body).await.0, StatusCode::UNPROCESSABLE_ENTITY);
        neg[3] = -1e-12;
        let body = serde_json::json!({ "values": neg }).to_string();
        assert_eq!(call(app, Method::POST, "/reconstruct", &body).await.0, StatusCode::OK);
    }

    #[tokio::test]
    async fn health_and_cors() {
        let (s, _) = state();
        let app = router(s);
        let req = Request::builder().method(Method::GET).uri("/health").body(Body::empty()).unwrap();
        let res = app.clone().oneshot(req).await.unwrap();
        assert_eq!(res.status(), StatusCode::OK);
        assert_eq!(res.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "*");
        let (status, _) = call(app, Method::OPTIONS, "/reconstruct", "").await;
        assert_eq!(status, StatusCode::NO_CONTENT);
    }

    #[test]
    fn missing_stats_is_rejected() {
        let (s, _) = state();
        let mut model = s.model.clone();
        model.meta.stats = None;
        assert!(ServiceState::new(model, "x".into()).is_err());
    }
}
