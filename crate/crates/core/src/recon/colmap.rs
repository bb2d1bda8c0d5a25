//! COLMAP sparse text layout (`cameras.txt`, `images.txt`, `points3D.txt`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Point3, Vector3};

use super::{
    camera_model_arity, CameraModel, Observation, PosedImage, ReconError, Reconstruction, TrackElement,
    TrackPoint,
};

const CAMERAS: &str = "cameras.txt";
const IMAGES: &str = "images.txt";
const POINTS: &str = "points3D.txt";

struct LineCtx<'a> {
    file: &'a str,
    line: usize,
}

impl LineCtx<'_> {
    fn err(&self, reason: impl Into<String>) -> ReconError {
        ReconError::MalformedLine {
            file: self.file.to_string(),
            line: self.line,
            reason: reason.into(),
        }
    }

    fn parse<T: FromStr>(&self, tok: Option<&str>, what: &str) -> Result<T, ReconError> {
        let tok = tok.ok_or_else(|| self.err(format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| self.err(format!("cannot parse {what} from {tok:?}")))
    }
}

fn read_file(dir: &Path, name: &str) -> Result<String, ReconError> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(ReconError::MissingFile(path));
    }
    std::fs::read_to_string(&path).map_err(|e| ReconError::io(path, e))
}

fn is_skippable(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

fn parse_cameras(text: &str) -> Result<BTreeMap<u32, CameraModel>, ReconError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if is_skippable(line) {
            continue;
        }
        let ctx = LineCtx { file: CAMERAS, line: i + 1 };
        let mut toks = line.split_whitespace();
        let id: u32 = ctx.parse(toks.next(), "camera id")?;
        let model_name = toks.next().ok_or_else(|| ctx.err("missing camera model"))?.to_string();
        let width: u64 = ctx.parse(toks.next(), "width")?;
        let height: u64 = ctx.parse(toks.next(), "height")?;
        let params = toks
            .map(|t| ctx.parse::<f64>(Some(t), "camera parameter"))
            .collect::<Result<Vec<_>, _>>()?;
        let arity = camera_model_arity(&model_name).ok_or_else(|| ctx.err(format!("unknown camera model {model_name}")))?;
        if params.len() != arity {
            return Err(ctx.err(format!("{model_name} expects {arity} parameters, found {}", params.len())));
        }
        if width == 0 || height == 0 {
            return Err(ctx.err("camera dimensions must be positive"));
        }
        if out
            .insert(id, CameraModel { id, model_name, width, height, params })
            .is_some()
        {
            return Err(ctx.err(format!("duplicate camera id {id}")));
        }
    }
    Ok(out)
}

fn parse_images(text: &str) -> Result<BTreeMap<u32, PosedImage>, ReconError> {
    let mut out = BTreeMap::new();
    let mut lines = text.lines().enumerate();
    while let Some((i, line)) = lines.next() {
        if is_skippable(line) {
            continue;
        }
        let ctx = LineCtx { file: IMAGES, line: i + 1 };
        let mut toks = line.split_whitespace();
        let id: u32 = ctx.parse(toks.next(), "image id")?;
        let mut qvec = [0.0; 4];
        for (slot, name) in qvec.iter_mut().zip(["QW", "QX", "QY", "QZ"]) {
            *slot = ctx.parse(toks.next(), name)?;
        }
        let norm = qvec.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(ctx.err(format!("quaternion norm {norm} is not 1")));
        }
        let mut t = [0.0; 3];
        for (slot, name) in t.iter_mut().zip(["TX", "TY", "TZ"]) {
            *slot = ctx.parse(toks.next(), name)?;
        }
        let camera_id: u32 = ctx.parse(toks.next(), "camera id")?;
        let name = toks.collect::<Vec<_>>().join(" ");
        if name.is_empty() {
            return Err(ctx.err("missing image name"));
        }

        // the observation row always follows the pose row, and may be empty
        let (j, obs_line) = lines.next().unwrap_or((i + 1, ""));
        let octx = LineCtx { file: IMAGES, line: j + 1 };
        let toks: Vec<&str> = obs_line.split_whitespace().collect();
        if toks.len() % 3 != 0 {
            return Err(octx.err("observation row is not a list of (X, Y, POINT3D_ID) triples"));
        }
        let mut points2d = Vec::with_capacity(toks.len() / 3);
        for triple in toks.chunks(3) {
            let x: f64 = octx.parse(Some(triple[0]), "keypoint x")?;
            let y: f64 = octx.parse(Some(triple[1]), "keypoint y")?;
            let pid: i64 = octx.parse(Some(triple[2]), "point3D id")?;
            let point3d_id = match pid {
                -1 => None,
                p if p >= 0 => Some(p as u64),
                p => return Err(octx.err(format!("invalid point3D id {p}"))),
            };
            points2d.push(Observation { xy: [x, y], point3d_id });
        }
        let image = PosedImage {
            id,
            qvec,
            translation: Vector3::new(t[0], t[1], t[2]),
            camera_id,
            name,
            points2d,
        };
        if out.insert(id, image).is_some() {
            return Err(ctx.err(format!("duplicate image id {id}")));
        }
    }
    Ok(out)
}

fn parse_points(text: &str) -> Result<BTreeMap<u64, TrackPoint>, ReconError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if is_skippable(line) {
            continue;
        }
        let ctx = LineCtx { file: POINTS, line: i + 1 };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 8 || (toks.len() - 8) % 2 != 0 {
            return Err(ctx.err("expected ID X Y Z R G B ERROR followed by (IMAGE_ID, POINT2D_IDX) pairs"));
        }
        let id: u64 = ctx.parse(Some(toks[0]), "point id")?;
        let x: f64 = ctx.parse(Some(toks[1]), "X")?;
        let y: f64 = ctx.parse(Some(toks[2]), "Y")?;
        let z: f64 = ctx.parse(Some(toks[3]), "Z")?;
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(ctx.err("non-finite coordinate"));
        }
        let color = [
            ctx.parse::<u8>(Some(toks[4]), "R")?,
            ctx.parse::<u8>(Some(toks[5]), "G")?,
            ctx.parse::<u8>(Some(toks[6]), "B")?,
        ];
        let error: f64 = ctx.parse(Some(toks[7]), "ERROR")?;
        let track = toks[8..]
            .chunks(2)
            .map(|pair| {
                Ok(TrackElement {
                    image_id: ctx.parse(Some(pair[0]), "track image id")?,
                    point2d_idx: ctx.parse(Some(pair[1]), "track keypoint index")?,
                })
            })
            .collect::<Result<Vec<_>, ReconError>>()?;
        let point = TrackPoint {
            id,
            position: Point3::new(x, y, z),
            color,
            error,
            track,
        };
        if out.insert(id, point).is_some() {
            return Err(ctx.err(format!("duplicate point id {id}")));
        }
    }
    Ok(out)
}

fn reject_binary(dir: &Path) -> Result<(), ReconError> {
    let has_text = [CAMERAS, IMAGES, POINTS].iter().all(|f| dir.join(f).is_file());
    let has_bin = ["cameras.bin", "images.bin", "points3D.bin"]
        .iter()
        .any(|f| dir.join(f).is_file());
    if !has_text && has_bin {
        return Err(ReconError::UnsupportedFormat(format!(
            "{} holds a binary COLMAP model; export it with `colmap model_converter --output_type TXT`",
            dir.display()
        )));
    }
    Ok(())
}

/// Parse a COLMAP sparse text model from `dir`.
///
/// The three files are parsed on separate threads; the result is validated
/// for referential integrity in both directions.
pub fn parse_colmap_text(dir: impl AsRef<Path>) -> Result<Reconstruction, ReconError> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(ReconError::MissingFile(dir.to_path_buf()));
    }
    reject_binary(dir)?;
    let cams_text = read_file(dir, CAMERAS)?;
    let imgs_text = read_file(dir, IMAGES)?;
    let pts_text = read_file(dir, POINTS)?;
    let (cameras, images, points) = std::thread::scope(|s| {
        let c = s.spawn(|| parse_cameras(&cams_text));
        let i = s.spawn(|| parse_images(&imgs_text));
        let p = parse_points(&pts_text);
        (
            c.join().expect("camera parser panicked"),
            i.join().expect("image parser panicked"),
            p,
        )
    });
    Reconstruction::new(cameras?, images?, points?)
}

/// Write `recon` in COLMAP sparse text layout.
pub fn write_colmap_text(recon: &Reconstruction, dir: impl AsRef<Path>) -> Result<(), ReconError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| ReconError::io(dir, e))?;

    let mut cams = String::from("# Camera list with one line of data per camera:\n#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n");
    let _ = writeln!(cams, "# Number of cameras: {}", recon.cameras.len());
    for c in recon.cameras.values() {
        let _ = write!(cams, "{} {} {} {}", c.id, c.model_name, c.width, c.height);
        for p in &c.params {
            let _ = write!(cams, " {p}");
        }
        cams.push('\n');
    }

    let mut imgs = String::from("# Image list with two lines of data per image:\n#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n#   POINTS2D[] as (X, Y, POINT3D_ID)\n");
    let _ = writeln!(imgs, "# Number of images: {}", recon.images.len());
    for im in recon.images.values() {
        let [qw, qx, qy, qz] = im.qvec;
        let t = im.translation;
        let _ = writeln!(imgs, "{} {qw} {qx} {qy} {qz} {} {} {} {} {}", im.id, t.x, t.y, t.z, im.camera_id, im.name);
        let row: Vec<String> = im
            .points2d
            .iter()
            .map(|o| {
                let pid = o.point3d_id.map_or(-1, |p| p as i64);
                format!("{} {} {pid}", o.xy[0], o.xy[1])
            })
            .collect();
        imgs.push_str(&row.join(" "));
        imgs.push('\n');
    }

    let mut pts = String::from("# 3D point list with one line of data per point:\n#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n");
    let _ = writeln!(pts, "# Number of points: {}", recon.points.len());
    for p in recon.points.values() {
        let [r, g, b] = p.color;
        let _ = write!(pts, "{} {} {} {} {r} {g} {b} {}", p.id, p.position.x, p.position.y, p.position.z, p.error);
        for el in &p.track {
            let _ = write!(pts, " {} {}", el.image_id, el.point2d_idx);
        }
        pts.push('\n');
    }

    for (name, body) in [(CAMERAS, cams), (IMAGES, imgs), (POINTS, pts)] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| ReconError::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recon::{fixtures, RefKind};

    const CAMS: &str = "# comment\n1 PINHOLE 640 480 500 500 320 240\n";
    const IMGS: &str = "# comment\n\n1 1 0 0 0 0 0 0 1 a.jpg\n10 20 7\n2 1 0 0 0 1 0 0 1 b.jpg\n5 5 -1   30\t40 7\n";
    const PTS: &str = "# comment\n7 0.1 0.2 0.3 1 2 3 0.5 1 0 2 1\n";

    fn write_trio(dir: &Path, cams: &str, imgs: &str, pts: &str) {
        std::fs::write(dir.join(CAMERAS), cams).unwrap();
        std::fs::write(dir.join(IMAGES), imgs).unwrap();
        std::fs::write(dir.join(POINTS), pts).unwrap();
    }

    #[test]
    fn minimal_trio_parses() {
        let dir = tempfile::tempdir().unwrap();
        write_trio(dir.path(), CAMS, IMGS, PTS);
        let r = parse_colmap_text(dir.path()).unwrap();
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.images.len(), 2);
        assert_eq!(r.images[&2].observed_points(), vec![7]);
        assert_eq!(r.images[&2].points2d.len(), 2);
    }

    #[test]
    fn empty_observation_row_keeps_image() {
        let dir = tempfile::tempdir().unwrap();
        let imgs = "1 1 0 0 0 0 0 0 1 a.jpg\n10 20 7\n3 1 0 0 0 0 0 0 1 c.jpg\n\n2 1 0 0 0 1 0 0 1 b.jpg\n30 40 7\n";
        write_trio(dir.path(), CAMS, imgs, "7 0.1 0.2 0.3 1 2 3 0.5 1 0 2 0\n");
        let r = parse_colmap_text(dir.path()).unwrap();
        assert_eq!(r.images.len(), 3);
        assert!(r.images[&3].points2d.is_empty());
    }

    #[test]
    fn dangling_image_reference() {
        let dir = tempfile::tempdir().unwrap();
        write_trio(dir.path(), CAMS, IMGS, "7 0.1 0.2 0.3 1 2 3 0.5 1 0 99 1\n");
        match parse_colmap_text(dir.path()) {
            Err(ReconError::DanglingReference { kind: RefKind::PointToImage, id: 99 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_named() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(CAMERAS), CAMS).unwrap();
        std::fs::write(dir.path().join(IMAGES), IMGS).unwrap();
        let err = parse_colmap_text(dir.path()).unwrap_err();
        assert!(matches!(err, ReconError::MissingFile(_)));
        assert!(err.to_string().contains("points3D.txt"));
    }

    #[test]
    fn malformed_line_reports_number() {
        let dir = tempfile::tempdir().unwrap();
        write_trio(dir.path(), CAMS, IMGS, "# c\n# c\n7 0.1 oops 0.3 1 2 3 0.5 1 0 2 1\n");
        match parse_colmap_text(dir.path()) {
            Err(ReconError::MalformedLine { file, line, .. }) => {
                assert_eq!(file, POINTS);
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn camera_arity_checked() {
        let dir = tempfile::tempdir().unwrap();
        write_trio(dir.path(), "1 PINHOLE 640 480 500 500 320\n", IMGS, PTS);
        assert!(matches!(parse_colmap_text(dir.path()), Err(ReconError::MalformedLine { line: 1, .. })));
    }

    #[test]
    fn binary_model_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for f in ["cameras.bin", "images.bin", "points3D.bin"] {
            std::fs::write(dir.path().join(f), b"\0").unwrap();
        }
        assert!(matches!(parse_colmap_text(dir.path()), Err(ReconError::UnsupportedFormat(_))));
    }

    #[test]
    fn write_then_parse_is_lossless() {
        let r = fixtures::minimal();
        let dir = tempfile::tempdir().unwrap();
        write_colmap_text(&r, dir.path()).unwrap();
        let back = parse_colmap_text(dir.path()).unwrap();
        assert_eq!(back, r);
    }
}
