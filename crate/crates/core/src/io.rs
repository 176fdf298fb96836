//! Versioned JSON documents for models, spaces and scenes, and the CSV
//! formats for points, fields and observations.

use std::io::{Read, Write};

use nalgebra::Matrix2xX;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calib::{Intrinsics, Observation, Observations, Pose, Scene, Target};
use crate::error::{Error, Result};
use crate::families::{DistortionFunction, ModelSpace};
use crate::poly::{ComplexPoly, MonomialKey, Point2, RealPolyModel};
use crate::warp::FieldSample;

pub const MODEL_FORMAT: &str = "lensdist-model";
pub const SPACE_FORMAT: &str = "lensdist-space";
pub const SCENE_FORMAT: &str = "lensdist-scene";
pub const VERSION: u32 = 1;

/// Which coefficient form a model document is written in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Complex,
    Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDoc {
    pub k: u32,
    pub l: u32,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDoc {
    pub degree: u32,
    pub rows: [Vec<f64>; 2],
}

/// Model document. `format` and `version` are required at top level and
/// optional when the model is embedded in another document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complex: Option<Vec<TermDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub real: Option<Vec<BlockDoc>>,
}

fn check_header(format: Option<&str>, version: Option<u32>, want: &str, required: bool) -> Result<()> {
    match (format, version) {
        (Some(f), _) if f != want => Err(Error::Format(format!("expected format \"{want}\", got \"{f}\""))),
        (_, Some(v)) if v != VERSION => Err(Error::Format(format!("unsupported version {v}"))),
        (None, _) | (_, None) if required => {
            Err(Error::Format(format!("missing \"format\" or \"version\" for {want}")))
        }
        _ => Ok(()),
    }
}

impl ModelDoc {
    pub fn from_function(f: &DistortionFunction, repr: Representation, header: bool) -> Self {
        let (complex, real) = match repr {
            Representation::Complex => (
                Some(
                    f.poly()
                        .terms()
                        .map(|(key, c)| TermDoc {
                            k: key.k(),
                            l: key.l(),
                            re: c.re,
                            im: c.im,
                        })
                        .collect(),
                ),
                None,
            ),
            Representation::Real => (
                None,
                Some(
                    f.real_form()
                        .blocks()
                        .map(|(degree, m)| BlockDoc {
                            degree,
                            rows: [m.row(0).iter().copied().collect(), m.row(1).iter().copied().collect()],
                        })
                        .collect(),
                ),
            ),
        };
        Self {
            format: header.then(|| MODEL_FORMAT.to_string()),
            version: header.then_some(VERSION),
            complex,
            real,
        }
    }

    pub fn to_function(&self, top_level: bool) -> Result<DistortionFunction> {
        check_header(self.format.as_deref(), self.version, MODEL_FORMAT, top_level)?;
        match (&self.complex, &self.real) {
            (Some(terms), None) => {
                let mut poly = ComplexPoly::zero();
                for t in terms {
                    if !(t.re.is_finite() && t.im.is_finite()) {
                        return Err(Error::Format("coefficients must be finite".into()));
                    }
                    if poly.coeff(t.k, t.l) != Complex64::new(0.0, 0.0) {
                        return Err(Error::Format(format!("duplicate term ({}, {})", t.k, t.l)));
                    }
                    poly.add_term(MonomialKey::new(t.k, t.l)?, Complex64::new(t.re, t.im));
                }
                Ok(DistortionFunction::from_poly(poly))
            }
            (None, Some(blocks)) => {
                let mut real = RealPolyModel::new();
                for b in blocks {
                    if b.rows[0].len() != b.rows[1].len() {
                        return Err(Error::BlockShape {
                            degree: b.degree,
                            expected: b.degree as usize + 1,
                            rows: 2,
                            cols: b.rows[0].len().max(b.rows[1].len()),
                        });
                    }
                    if b.rows.iter().flatten().any(|v| !v.is_finite()) {
                        return Err(Error::Format("coefficients must be finite".into()));
                    }
                    if real.block(b.degree).is_some() {
                        return Err(Error::Format(format!("duplicate degree {}", b.degree)));
                    }
                    let m = Matrix2xX::from_fn(b.rows[0].len(), |r, c| b.rows[r][c]);
                    real.set_block(b.degree, m)?;
                }
                Ok(DistortionFunction::from_real(real))
            }
            _ => Err(Error::Format(
                "model needs exactly one of \"complex\" or \"real\"".into(),
            )),
        }
    }
}

pub fn parse_model(text: &str) -> Result<DistortionFunction> {
    serde_json::from_str::<ModelDoc>(text)?.to_function(true)
}

pub fn model_to_json(f: &DistortionFunction, repr: Representation) -> String {
    to_json(&ModelDoc::from_function(f, repr, true))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDoc {
    pub format: String,
    pub version: u32,
    pub label: String,
    pub basis: Vec<ModelDoc>,
}

pub fn parse_space(text: &str) -> Result<ModelSpace> {
    let doc: SpaceDoc = serde_json::from_str(text)?;
    check_header(Some(&doc.format), Some(doc.version), SPACE_FORMAT, true)?;
    let basis = doc
        .basis
        .iter()
        .map(|m| m.to_function(false))
        .collect::<Result<Vec<_>>>()?;
    ModelSpace::new(doc.label, basis)
}

pub fn space_to_json(space: &ModelSpace, repr: Representation) -> String {
    to_json(&SpaceDoc {
        format: SPACE_FORMAT.into(),
        version: VERSION,
        label: space.label().into(),
        basis: space
            .basis()
            .iter()
            .map(|f| ModelDoc::from_function(f, repr, false))
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseDoc {
    pub axis_angle: [f64; 3],
    pub t: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDoc {
    pub format: String,
    pub version: u32,
    pub target: Target,
    pub poses: Vec<PoseDoc>,
    pub intrinsics: Intrinsics,
    pub truth: ModelDoc,
    pub sigma: f64,
    pub seed: u64,
}

pub fn parse_scene(text: &str) -> Result<Scene> {
    let doc: SceneDoc = serde_json::from_str(text)?;
    check_header(Some(&doc.format), Some(doc.version), SCENE_FORMAT, true)?;
    let scene = Scene {
        target: doc.target,
        poses: doc.poses.iter().map(|p| Pose::new(p.axis_angle, p.t)).collect(),
        intrinsics: doc.intrinsics,
        truth: doc.truth.to_function(false)?,
        noise_sigma: doc.sigma,
        seed: doc.seed,
    };
    scene.validate()?;
    Ok(scene)
}

pub fn scene_to_json(scene: &Scene) -> String {
    to_json(&SceneDoc {
        format: SCENE_FORMAT.into(),
        version: VERSION,
        target: scene.target,
        poses: scene
            .poses
            .iter()
            .map(|p| PoseDoc {
                axis_angle: p.rotation,
                t: p.translation,
            })
            .collect(),
        intrinsics: scene.intrinsics,
        truth: ModelDoc::from_function(&scene.truth, Representation::Complex, false),
        sigma: scene.noise_sigma,
        seed: scene.seed,
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn write_points_csv<W: Write>(w: W, points: &[Point2]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["x", "y"])?;
    for p in points {
        out.write_record([fmt_f64(p.x), fmt_f64(p.y)])?;
    }
    out.flush()?;
    Ok(())
}

fn expect_header<R: Read>(r: &mut csv::Reader<R>, want: &[&str]) -> Result<()> {
    let header = r.headers()?;
    if header.iter().map(str::trim).ne(want.iter().copied()) {
        return Err(Error::Format(format!(
            "expected CSV header {}, got {}",
            want.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Format(format!("bad CSV value in column {} of {:?}", i + 1, rec)))
}

pub fn read_points_csv<R: Read>(r: R) -> Result<Vec<Point2>> {
    let mut rd = csv::Reader::from_reader(r);
    expect_header(&mut rd, &["x", "y"])?;
    rd.records()
        .map(|rec| {
            let rec = rec?;
            Ok(Point2::new(field(&rec, 0)?, field(&rec, 1)?))
        })
        .collect()
}

pub fn write_field_csv<W: Write>(w: W, samples: &[FieldSample]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["x", "y", "xd", "yd"])?;
    for s in samples {
        out.write_record([
            fmt_f64(s.source.x),
            fmt_f64(s.source.y),
            fmt_f64(s.displaced.x),
            fmt_f64(s.displaced.y),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_observations_csv<W: Write>(w: W, obs: &Observations) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["view", "point", "u", "v"])?;
    for o in &obs.items {
        out.write_record([
            o.view.to_string(),
            o.point.to_string(),
            fmt_f64(o.pixel.x),
            fmt_f64(o.pixel.y),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_observations_csv<R: Read>(r: R) -> Result<Observations> {
    let mut rd = csv::Reader::from_reader(r);
    expect_header(&mut rd, &["view", "point", "u", "v"])?;
    let items = rd
        .records()
        .map(|rec| {
            let rec = rec?;
            Ok(Observation {
                view: field(&rec, 0)?,
                point: field(&rec, 1)?,
                pixel: Point2::new(field(&rec, 2)?, field(&rec, 3)?),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Observations { items })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{decentering, named_space, rri};

    #[test]
    fn model_round_trips_in_both_forms() {
        let f = decentering(0.02, -0.01).sum(&rri(&[0.08, -0.02]).unwrap());
        for repr in [Representation::Complex, Representation::Real] {
            let g = parse_model(&model_to_json(&f, repr)).unwrap();
            assert!(g.poly().approx_eq(f.poly(), 1e-15));
        }
        let real = parse_model(&model_to_json(&f, Representation::Real)).unwrap();
        assert_eq!(real.real_form(), f.real_form());
    }

    #[test]
    fn model_parse_errors() {
        for bad in [
            "{",
            r#"{"format":"lensdist-model","version":1}"#,
            r#"{"format":"lensdist-model","version":2,"complex":[]}"#,
            r#"{"format":"other","version":1,"complex":[]}"#,
            r#"{"complex":[]}"#,
            r#"{"format":"lensdist-model","version":1,"complex":[],"real":[]}"#,
            r#"{"format":"lensdist-model","version":1,"complex":[{"k":1,"l":0,"re":1,"im":0}]}"#,
            r#"{"format":"lensdist-model","version":1,"real":[{"degree":2,"rows":[[1,2],[3,4]]}]}"#,
            r#"{"format":"lensdist-model","version":1,"complex":[],"extra":1}"#,
        ] {
            assert!(parse_model(bad).is_err(), "{bad}");
        }
        let empty = parse_model(r#"{"format":"lensdist-model","version":1,"complex":[]}"#).unwrap();
        assert!(empty.is_zero());
    }

    #[test]
    fn space_and_scene_round_trip() {
        let s = named_space("matlab").unwrap();
        let t = parse_space(&space_to_json(&s, Representation::Real)).unwrap();
        assert_eq!(t.label(), "matlab");
        assert_eq!(t.dimension(), 5);
        let scene = Scene::default_scene();
        let text = scene_to_json(&scene);
        let back = parse_scene(&text).unwrap();
        assert_eq!(back.poses, scene.poses);
        assert!(back.truth.poly().approx_eq(scene.truth.poly(), 0.0));
        assert_eq!(scene_to_json(&back), text);
    }

    #[test]
    fn csv_round_trips_exactly() {
        let pts = vec![Point2::new(0.1, -1.0 / 3.0), Point2::new(1e-300, 7.0)];
        let mut buf = Vec::new();
        write_points_csv(&mut buf, &pts).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("x,y\n"));
        assert_eq!(read_points_csv(&buf[..]).unwrap(), pts);

        let obs = Observations {
            items: vec![Observation { view: 1, point: 3, pixel: Point2::new(640.125, 1.0 / 7.0) }],
        };
        let mut buf = Vec::new();
        write_observations_csv(&mut buf, &obs).unwrap();
        assert_eq!(read_observations_csv(&buf[..]).unwrap(), obs);
        assert!(read_points_csv(&b"a,b\n1,2\n"[..]).is_err());
        assert!(read_points_csv(&b"x,y\n1,nope\n"[..]).is_err());
    }
}
