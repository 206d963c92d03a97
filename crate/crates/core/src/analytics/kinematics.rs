use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{pose_at_reference, ReferencePoint, TimePoint, VehicleParameters};
use crate::log::{BoxDetection, BoxFrame, EgoStateRecord};
use crate::sync::{match_timestamp, MatchCriteria};

/// One observation of a track with its derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KinematicSample {
    pub timestamp: TimePoint,
    /// Planar distance to the ego center; `None` when the log has no ego poses.
    pub ego_distance: Option<f64>,
    pub speed: Option<f64>,
    /// Negative when braking dominates: the along-track component is negative and
    /// larger than the lateral one.
    pub acceleration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackKinematics {
    pub track_id: String,
    pub raw_label: String,
    pub samples: Vec<KinematicSample>,
}

/// Box observations of each track, time-sorted, keyed by track id.
pub fn tracks_from_frames(frames: &[BoxFrame]) -> BTreeMap<&str, Vec<(TimePoint, &BoxDetection)>> {
    let mut tracks: BTreeMap<&str, Vec<(TimePoint, &BoxDetection)>> = BTreeMap::new();
    for f in frames {
        for b in &f.boxes {
            tracks.entry(b.track_id.as_str()).or_default().push((f.timestamp, b));
        }
    }
    tracks
}

/// Finite differences of `values` over irregular `t`: central inside, one-sided at
/// the ends.
fn differentiate(t: &[f64], values: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let dt = t[b] - t[a];
            [(values[b][0] - values[a][0]) / dt, (values[b][1] - values[a][1]) / dt]
        })
        .collect()
}

/// Ego distance, speed and acceleration per observation of one track.
///
/// Speed is the planar magnitude of the differenced box center. Acceleration is the
/// magnitude of the differenced velocity vector, so circular motion reports its
/// centripetal part. Single-observation tracks get distance only.
pub fn track_kinematics(
    track: &[(TimePoint, &BoxDetection)],
    ego: &[EgoStateRecord],
    vehicle: &VehicleParameters,
) -> Result<TrackKinematics> {
    let Some((_, first)) = track.first() else {
        return Err(Error::EmptyTrack);
    };
    let ego_times: Vec<TimePoint> = ego.iter().map(|e| e.timestamp).collect();
    let distance = |t: TimePoint, p: [f64; 3]| -> Result<Option<f64>> {
        match match_timestamp(&ego_times, t, &MatchCriteria::nearest()) {
            None => Ok(None),
            Some(i) => {
                let c = pose_at_reference(&ego[i].pose, vehicle, ReferencePoint::Center)?.translation;
                Ok(Some((p[0] - c[0]).hypot(p[1] - c[1])))
            }
        }
    };

    let t: Vec<f64> = track.iter().map(|(ts, _)| ts.micros() as f64 * 1e-6).collect();
    let pos: Vec<[f64; 2]> = track.iter().map(|(_, b)| [b.pose.translation[0], b.pose.translation[1]]).collect();
    let (vel, acc) = if track.len() > 1 {
        let v = differentiate(&t, &pos);
        let a = differentiate(&t, &v);
        (Some(v), Some(a))
    } else {
        (None, None)
    };

    let samples = track
        .iter()
        .enumerate()
        .map(|(i, (ts, b))| {
            let v = vel.as_ref().map(|v| v[i]);
            let a = acc.as_ref().map(|a| a[i]);
            let acceleration = v.zip(a).map(|(v, a)| {
                let mag = a[0].hypot(a[1]);
                let along = v[0] * a[0] + v[1] * a[1];
                let lateral = v[0] * a[1] - v[1] * a[0];
                if along < 0.0 && -along > lateral.abs() {
                    -mag
                } else {
                    mag
                }
            });
            Ok(KinematicSample { timestamp: *ts, ego_distance: distance(*ts, b.pose.translation)?, speed: v.map(|v| v[0].hypot(v[1])), acceleration })
        })
        .collect::<Result<_>>()?;
    Ok(TrackKinematics { track_id: first.track_id.clone(), raw_label: first.raw_label.clone(), samples })
}
