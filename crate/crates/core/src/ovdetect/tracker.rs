use super::Detection;

/// Default association gate in pixels between consecutive box centers.
pub const DEFAULT_MAX_TRACK_DIST: f64 = 50.0;

/// Assigns stable object ids across frames.
///
/// Prior detections are visited in ascending id order; each claims the
/// nearest unclaimed current detection with the same label whose center lies
/// within the gate. Leftover detections get fresh ids in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracker {
    max_track_dist: f64,
    next_id: u64,
    prev: Vec<Detection>,
}

impl Tracker {
    pub fn new(max_track_dist: f64) -> Self {
        Self {
            max_track_dist,
            next_id: 1,
            prev: Vec::new(),
        }
    }

    /// Matches `cur` against the previous call's output.
    pub fn update(&mut self, cur: Vec<Detection>) -> Vec<Detection> {
        let prev = std::mem::take(&mut self.prev);
        let out = self.assign(&prev, cur);
        self.prev = out.clone();
        out
    }

    pub fn assign(&mut self, prev: &[Detection], mut cur: Vec<Detection>) -> Vec<Detection> {
        let mut order: Vec<&Detection> = prev.iter().collect();
        order.sort_by_key(|d| d.object_id);
        let mut claimed = vec![false; cur.len()];
        for p in order {
            let (pu, pv) = p.bbox.center();
            let mut best: Option<(usize, f64)> = None;
            for (j, c) in cur.iter().enumerate() {
                if claimed[j] || c.label != p.label {
                    continue;
                }
                let (cu, cv) = c.bbox.center();
                let dist = ((cu - pu).powi(2) + (cv - pv).powi(2)).sqrt();
                if dist <= self.max_track_dist && best.is_none_or(|(_, b)| dist < b) {
                    best = Some((j, dist));
                }
            }
            if let Some((j, _)) = best {
                claimed[j] = true;
                cur[j].object_id = p.object_id;
                self.next_id = self.next_id.max(p.object_id + 1);
            }
        }
        for (j, c) in cur.iter_mut().enumerate() {
            if !claimed[j] {
                c.object_id = self.next_id;
                self.next_id += 1;
            }
        }
        cur
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.max_track_dist);
    }
}

impl Default for Tracker {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_TRACK_DIST)
    }
}

/// One-shot form of [`Tracker::assign`] with a fresh tracker whose new ids
/// start above every prior id.
pub fn track_ids(prev: &[Detection], cur: Vec<Detection>, max_track_dist: f64) -> Vec<Detection> {
    let mut t = Tracker::new(max_track_dist);
    t.next_id = prev.iter().map(|d| d.object_id + 1).max().unwrap_or(1);
    t.assign(prev, cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    fn det(label: &str, cx: f64, cy: f64, id: u64) -> Detection {
        Detection {
            bbox: BBox::new(cx - 10.0, cy - 10.0, cx + 10.0, cy + 10.0),
            label: label.into(),
            score: 0.7,
            object_id: id,
        }
    }

    #[test]
    fn identical_frames_keep_ids() {
        let mut t = Tracker::default();
        let a = t.update(vec![det("a", 50.0, 50.0, 0), det("b", 200.0, 50.0, 0)]);
        let b = t.update(vec![det("a", 50.0, 50.0, 0), det("b", 200.0, 50.0, 0)]);
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|d| d.object_id).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn small_motion_keeps_id() {
        let prev = vec![det("a", 50.0, 50.0, 7)];
        let cur = track_ids(&prev, vec![det("a", 53.0, 50.0, 0)], 50.0);
        assert_eq!(cur[0].object_id, 7);
        let far = track_ids(&prev, vec![det("a", 150.0, 50.0, 0)], 50.0);
        assert_eq!(far[0].object_id, 8);
    }

    #[test]
    fn lower_prior_id_claims_first() {
        // Both candidates are nearest to prior id 4; id 4 is visited first and
        // takes the closer one, id 9 gets the remaining one.
        let prev = vec![det("a", 100.0, 100.0, 9), det("a", 104.0, 100.0, 4)];
        let cur = vec![det("a", 103.0, 100.0, 0), det("a", 108.0, 100.0, 0)];
        let out = track_ids(&prev, cur, 50.0);
        assert_eq!(out[0].object_id, 4);
        assert_eq!(out[1].object_id, 9);
    }

    #[test]
    fn labels_do_not_cross() {
        let prev = vec![det("a", 100.0, 100.0, 3)];
        let out = track_ids(&prev, vec![det("b", 100.0, 100.0, 0)], 50.0);
        assert_eq!(out[0].object_id, 4);
    }
}
