//! Primitive skeleton binding.
//!
//! A binding pairs `n` key joints of a source skeleton with key joints of a
//! robot. Restricting each skeleton to its key joints gives an induced tree
//! (a key joint's parent is its nearest key-joint ancestor); when the two
//! induced trees agree under the pairing they form one primitive skeleton
//! with a single bone between successive key joints. Each bone stores the
//! rest-pose arc length of the joint chain it replaces on both sides and the
//! ratio `s_k = target / source`.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BindError, Error};
use crate::mocap::{EffectorKind, RobotSkeleton, Skeleton};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingConfig {
    /// `(source_joint, target_joint)` name pairs.
    pub pairs: Vec<(String, String)>,
}

impl BindingConfig {
    pub fn new(pairs: impl IntoIterator<Item = (impl Into<String>, impl Into<String>)>) -> Self {
        Self {
            pairs: pairs
                .into_iter()
                .map(|(a, b)| (a.into(), b.into()))
                .collect(),
        }
    }

    /// Parse `{"pairs": [["source", "target"], ...]}`.
    pub fn from_json(text: &str) -> Result<Self, BindError> {
        serde_json::from_str(text).map_err(|e| BindError::Json(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Ok(Self::from_json(&text)?)
    }

    /// Identity binding of a skeleton onto itself over the named joints.
    pub fn identity<S: AsRef<str>>(names: &[S]) -> Self {
        Self::new(
            names
                .iter()
                .map(|n| (n.as_ref().to_string(), n.as_ref().to_string())),
        )
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyNode {
    pub source_index: usize,
    pub target_index: usize,
    /// Parent key node in the primitive tree.
    pub primitive_parent: Option<usize>,
    pub source_name: String,
    pub target_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveBone {
    pub child_node: usize,
    pub source_length: f64,
    pub target_length: f64,
    pub ratio: f64,
}

/// Key nodes are ordered parents-first (by source joint index), so node 0 is
/// the primitive root and `bones[k - 1]` ends at node `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveSkeleton {
    pub key_nodes: Vec<KeyNode>,
    pub bones: Vec<PrimitiveBone>,
}

impl PrimitiveSkeleton {
    pub fn len(&self) -> usize {
        self.key_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.key_nodes.is_empty()
    }

    /// Ratio of the bone ending at `node` (1 for the root).
    pub fn ratio(&self, node: usize) -> f64 {
        if node == 0 {
            1.0
        } else {
            self.bones[node - 1].ratio
        }
    }

    pub fn node_for_target(&self, target_joint: usize) -> Option<usize> {
        self.key_nodes
            .iter()
            .position(|k| k.target_index == target_joint)
    }

    /// Summed `(source, target)` bone lengths from the primitive root down to
    /// `node`.
    pub fn chain_lengths(&self, mut node: usize) -> (f64, f64) {
        let (mut s, mut t) = (0.0, 0.0);
        while node != 0 {
            let bone = &self.bones[node - 1];
            s += bone.source_length;
            t += bone.target_length;
            node = self.key_nodes[node]
                .primitive_parent
                .expect("non-root nodes have parents");
        }
        (s, t)
    }

    /// Root translation scale: target/source leg arc-length ratio averaged
    /// over the robot's feet. Falls back to the mean bone ratio when the robot
    /// declares no feet among the key joints.
    pub fn leg_ratio(&self, robot: &RobotSkeleton) -> f64 {
        let ratios: Vec<f64> = robot
            .effectors(EffectorKind::Foot)
            .filter_map(|e| self.node_for_target(e.joint))
            .map(|node| self.chain_lengths(node))
            .filter(|(s, _)| *s > 0.0)
            .map(|(s, t)| t / s)
            .collect();
        if ratios.is_empty() {
            self.bones.iter().map(|b| b.ratio).sum::<f64>() / self.bones.len().max(1) as f64
        } else {
            ratios.iter().sum::<f64>() / ratios.len() as f64
        }
    }
}

/// Parent of each key joint within the key-joint set (indices into
/// `key_joints`). Exactly one key joint may lack a key-joint ancestor.
pub fn induced_tree(
    skeleton: &Skeleton,
    key_joints: &[usize],
) -> Result<Vec<Option<usize>>, BindError> {
    induced_tree_named(skeleton, key_joints, "source")
}

fn induced_tree_named(
    skeleton: &Skeleton,
    key_joints: &[usize],
    side: &'static str,
) -> Result<Vec<Option<usize>>, BindError> {
    let mut slot = vec![None; skeleton.len()];
    for (k, &j) in key_joints.iter().enumerate() {
        if j >= skeleton.len() {
            return Err(BindError::UnknownJoint {
                side,
                name: format!("#{j}"),
            });
        }
        if slot[j].replace(k).is_some() {
            return Err(BindError::DuplicateJoint {
                side,
                name: skeleton.joints[j].name.clone(),
            });
        }
    }
    let parents: Vec<Option<usize>> = key_joints
        .iter()
        .map(|&j| {
            let mut cursor = skeleton.parent(j);
            while let Some(a) = cursor {
                if let Some(k) = slot[a] {
                    return Some(k);
                }
                cursor = skeleton.parent(a);
            }
            None
        })
        .collect();
    let orphans: Vec<usize> = (0..key_joints.len())
        .filter(|&k| parents[k].is_none())
        .collect();
    if orphans.len() > 1 {
        return Err(BindError::Forest {
            side,
            a: skeleton.joints[key_joints[orphans[0]]].name.clone(),
            b: skeleton.joints[key_joints[orphans[1]]].name.clone(),
        });
    }
    Ok(parents)
}

/// Merge source and robot key joints into a primitive skeleton.
pub fn bind(
    source: &Skeleton,
    target: &RobotSkeleton,
    config: &BindingConfig,
) -> Result<PrimitiveSkeleton, BindError> {
    let tsk = &target.skeleton;
    if config.pairs.len() < 2 {
        return Err(BindError::TooFewPairs(config.pairs.len()));
    }
    let mut seen_s = HashSet::new();
    let mut seen_t = HashSet::new();
    let mut resolved = Vec::with_capacity(config.pairs.len());
    for (s, t) in &config.pairs {
        let si = source.index_of(s).ok_or_else(|| BindError::UnknownJoint {
            side: "source",
            name: s.clone(),
        })?;
        let ti = tsk.index_of(t).ok_or_else(|| BindError::UnknownJoint {
            side: "target",
            name: t.clone(),
        })?;
        if !seen_s.insert(si) {
            return Err(BindError::DuplicateJoint {
                side: "source",
                name: s.clone(),
            });
        }
        if !seen_t.insert(ti) {
            return Err(BindError::DuplicateJoint {
                side: "target",
                name: t.clone(),
            });
        }
        resolved.push((si, ti));
    }
    // canonical order, independent of declaration order
    resolved.sort_unstable();

    let src_keys: Vec<usize> = resolved.iter().map(|p| p.0).collect();
    let tgt_keys: Vec<usize> = resolved.iter().map(|p| p.1).collect();
    let src_tree = induced_tree_named(source, &src_keys, "source")?;
    let tgt_tree = induced_tree_named(tsk, &tgt_keys, "target")?;

    if src_keys[0] != source.root_index {
        return Err(BindError::RootNotKey {
            side: "source",
            root: source.joints[source.root_index].name.clone(),
        });
    }
    if !tgt_keys.contains(&tsk.root_index) {
        return Err(BindError::RootNotKey {
            side: "target",
            root: tsk.joints[tsk.root_index].name.clone(),
        });
    }

    let mut key_nodes = Vec::with_capacity(resolved.len());
    for (k, &(si, ti)) in resolved.iter().enumerate() {
        if src_tree[k] != tgt_tree[k] {
            return Err(BindError::TopologyMismatch {
                source_joint: source.joints[si].name.clone(),
                target_joint: tsk.joints[ti].name.clone(),
            });
        }
        key_nodes.push(KeyNode {
            source_index: si,
            target_index: ti,
            primitive_parent: src_tree[k],
            source_name: source.joints[si].name.clone(),
            target_name: tsk.joints[ti].name.clone(),
        });
    }

    let bones = key_nodes
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, node)| {
            let parent = &key_nodes[node.primitive_parent.expect("only node 0 is the root")];
            let source_length = source
                .chain_length(parent.source_index, node.source_index)
                .expect("induced ancestor");
            let target_length = tsk
                .chain_length(parent.target_index, node.target_index)
                .expect("induced ancestor");
            let ratio = target_length / source_length;
            if !(ratio.is_finite() && ratio > 0.0) {
                return Err(BindError::DegenerateBone {
                    source_joint: node.source_name.clone(),
                    target_joint: node.target_name.clone(),
                    source_length,
                    target_length,
                });
            }
            Ok(PrimitiveBone {
                child_node: k,
                source_length,
                target_length,
                ratio,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(PrimitiveSkeleton { key_nodes, bones })
}
