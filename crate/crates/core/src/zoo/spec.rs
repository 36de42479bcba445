use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{APPRAISAL_COUNT, EMOTION_COUNT};
use crate::error::{Error, Result};

/// 20 appraisal dimensions times three Likert segments.
pub const APPRAISAL_LOGITS: usize = APPRAISAL_COUNT * 3;
pub const PCB_CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Text,
    Appraisals,
    Emotions,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Text => "text",
            Modality::Appraisals => "appraisals",
            Modality::Emotions => "emotions",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Baseline,
    Constrained,
    MultiModal,
    MultiTask,
    Theoretical,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Baseline,
        Family::Constrained,
        Family::MultiModal,
        Family::MultiTask,
        Family::Theoretical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Baseline => "baseline",
            Family::Constrained => "constrained",
            Family::MultiModal => "multi_modal",
            Family::MultiTask => "multi_task",
            Family::Theoretical => "theoretical",
        }
    }

    /// Group header used in result tables.
    pub fn title(self) -> &'static str {
        match self {
            Family::Baseline => "Baseline",
            Family::Constrained => "Constrained",
            Family::MultiModal => "Multi-modal",
            Family::MultiTask => "Multi-task",
            Family::Theoretical => "Theoretical model",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown family `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    TextEmbedding,
    AppraisalRatings,
    EmotionRatings,
    AppraisalHead,
    EmotionHead,
    FusionConcat,
    PcbHead,
}

impl NodeKind {
    pub fn input_modality(self) -> Option<Modality> {
        match self {
            NodeKind::TextEmbedding => Some(Modality::Text),
            NodeKind::AppraisalRatings => Some(Modality::Appraisals),
            NodeKind::EmotionRatings => Some(Modality::Emotions),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::TextEmbedding => "text_embedding",
            NodeKind::AppraisalRatings => "appraisal_ratings",
            NodeKind::EmotionRatings => "emotion_ratings",
            NodeKind::AppraisalHead => "appraisal_head",
            NodeKind::EmotionHead => "emotion_head",
            NodeKind::FusionConcat => "fusion_concat",
            NodeKind::PcbHead => "pcb_head",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub kind: NodeKind,
    pub width: usize,
}

/// A feed-forward edge. An empty width list is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: NodeKind,
    pub to: NodeKind,
    pub widths: Vec<usize>,
    /// ReLU on the last layer; set for trunks reused as hidden features.
    pub activate_output: bool,
    /// Architecture whose trained weights this edge adopts, frozen.
    pub frozen_from: Option<u8>,
}

impl EdgeSpec {
    fn new(from: NodeKind, to: NodeKind, widths: &[usize]) -> Self {
        Self {
            from,
            to,
            widths: widths.to_vec(),
            activate_output: false,
            frozen_from: None,
        }
    }

    fn frozen(mut self, from: u8, activate_output: bool) -> Self {
        self.frozen_from = Some(from);
        self.activate_output = activate_output;
        self
    }

    /// Parameter prefix of this edge; layer `i` lives under `{prefix}.{i}`.
    pub fn prefix(&self) -> String {
        format!("{}->{}", self.from.as_str(), self.to.as_str())
    }
}

/// Declarative graph of one architecture. Nodes are listed in topological
/// order; a node with several incoming edges concatenates them in edge order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub id: u8,
    pub name: String,
    pub family: Family,
    pub input_modalities: Vec<Modality>,
    pub auxiliary_targets: Vec<Modality>,
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
}

pub const ARCHITECTURE_IDS: std::ops::RangeInclusive<u8> = 1..=12;

const TRUNK: [usize; 3] = [1024, 512, PCB_CLASSES];

impl ArchitectureSpec {
    /// The twelve architectures; `d` is the text-embedding width.
    pub fn for_id(id: u8, d: usize) -> Result<Self> {
        use Modality::*;
        use NodeKind::*;
        let e = EdgeSpec::new;
        let (name, family, inputs, aux, edges): (&str, Family, Vec<Modality>, Vec<Modality>, Vec<EdgeSpec>) =
            match id {
                1 => ("Text -> PCB", Family::Baseline, vec![Text], vec![], vec![e(TextEmbedding, PcbHead, &[PCB_CLASSES])]),
                2 => ("Appraisals -> PCB", Family::Baseline, vec![Appraisals], vec![], vec![e(AppraisalRatings, PcbHead, &TRUNK)]),
                3 => ("Emotions -> PCB", Family::Baseline, vec![Emotions], vec![], vec![e(EmotionRatings, PcbHead, &TRUNK)]),
                4 => (
                    "Text -> Appraisals -> PCB",
                    Family::Constrained,
                    vec![Text],
                    vec![Appraisals],
                    vec![e(TextEmbedding, AppraisalHead, &[APPRAISAL_LOGITS]), e(AppraisalHead, PcbHead, &TRUNK)],
                ),
                5 => (
                    "Text -> Emotions -> PCB",
                    Family::Constrained,
                    vec![Text],
                    vec![Emotions],
                    vec![e(TextEmbedding, EmotionHead, &[EMOTION_COUNT]), e(EmotionHead, PcbHead, &TRUNK)],
                ),
                6 => (
                    "Text -> Appraisals -> Emotions -> PCB",
                    Family::Constrained,
                    vec![Text],
                    vec![Appraisals, Emotions],
                    vec![
                        e(TextEmbedding, AppraisalHead, &[APPRAISAL_LOGITS]),
                        e(AppraisalHead, EmotionHead, &[512, EMOTION_COUNT]),
                        e(EmotionHead, PcbHead, &TRUNK),
                    ],
                ),
                7 => (
                    "Text + Appraisals -> PCB",
                    Family::MultiModal,
                    vec![Text, Appraisals],
                    vec![],
                    vec![
                        e(TextEmbedding, FusionConcat, &[]).frozen(1, false),
                        e(AppraisalRatings, FusionConcat, &TRUNK[..2]).frozen(2, true),
                        e(FusionConcat, PcbHead, &TRUNK),
                    ],
                ),
                8 => (
                    "Text + Emotions -> PCB",
                    Family::MultiModal,
                    vec![Text, Emotions],
                    vec![],
                    vec![
                        e(TextEmbedding, FusionConcat, &[]).frozen(1, false),
                        e(EmotionRatings, FusionConcat, &TRUNK[..2]).frozen(3, true),
                        e(FusionConcat, PcbHead, &TRUNK),
                    ],
                ),
                9 => (
                    "Text + Appraisals + Emotions -> PCB",
                    Family::MultiModal,
                    vec![Text, Appraisals, Emotions],
                    vec![],
                    vec![
                        e(TextEmbedding, FusionConcat, &[]).frozen(1, false),
                        e(AppraisalRatings, FusionConcat, &TRUNK[..2]).frozen(2, true),
                        e(EmotionRatings, FusionConcat, &TRUNK[..2]).frozen(3, true),
                        e(FusionConcat, PcbHead, &TRUNK),
                    ],
                ),
                10 => (
                    "Text -> PCB + Appraisals",
                    Family::MultiTask,
                    vec![Text],
                    vec![Appraisals],
                    vec![
                        e(TextEmbedding, AppraisalHead, &[APPRAISAL_LOGITS]),
                        e(TextEmbedding, FusionConcat, &[]),
                        e(AppraisalHead, FusionConcat, &[]),
                        e(FusionConcat, PcbHead, &[512, PCB_CLASSES]),
                    ],
                ),
                11 => (
                    "Text -> PCB + Emotions",
                    Family::MultiTask,
                    vec![Text],
                    vec![Emotions],
                    vec![
                        e(TextEmbedding, EmotionHead, &[EMOTION_COUNT]),
                        e(TextEmbedding, FusionConcat, &[]),
                        e(EmotionHead, FusionConcat, &[]),
                        e(FusionConcat, PcbHead, &[512, PCB_CLASSES]),
                    ],
                ),
                12 => (
                    "Text -> Appraisals -> Emotions -> PCB (theoretical)",
                    Family::Theoretical,
                    vec![Text],
                    vec![Appraisals, Emotions],
                    vec![
                        e(TextEmbedding, AppraisalHead, &[APPRAISAL_LOGITS]),
                        e(AppraisalHead, EmotionHead, &[512, EMOTION_COUNT]),
                        e(TextEmbedding, FusionConcat, &[]),
                        e(AppraisalHead, FusionConcat, &[]),
                        e(EmotionHead, FusionConcat, &[]),
                        e(FusionConcat, PcbHead, &[512, PCB_CLASSES]),
                    ],
                ),
                _ => return Err(Error::Config(format!("unknown architecture id {id}; expected 1..=12"))),
            };
        let spec = Self {
            id,
            name: name.to_string(),
            family,
            input_modalities: inputs,
            auxiliary_targets: aux,
            nodes: infer_nodes(&edges, d)?,
            edges,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn has_input(&self, m: Modality) -> bool {
        self.input_modalities.contains(&m)
    }

    pub fn has_auxiliary(&self, m: Modality) -> bool {
        self.auxiliary_targets.contains(&m)
    }

    pub fn node(&self, kind: NodeKind) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.kind == kind)
    }

    pub fn text_dim(&self) -> Option<usize> {
        self.node(NodeKind::TextEmbedding).map(|n| n.width)
    }

    /// Architectures whose trained weights this one adopts.
    pub fn components(&self) -> Vec<u8> {
        let mut c: Vec<u8> = self.edges.iter().filter_map(|e| e.frozen_from).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn incoming(&self, kind: NodeKind) -> impl Iterator<Item = &EdgeSpec> {
        self.edges.iter().filter(move |e| e.to == kind)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |k: NodeKind| self.nodes.iter().position(|n| n.kind == k);
        let sinks = self.nodes.iter().filter(|n| n.kind == NodeKind::PcbHead).count();
        if sinks != 1 {
            return Err(Error::Config(format!("architecture {} needs exactly one PCB head", self.id)));
        }
        for e in &self.edges {
            match (pos(e.from), pos(e.to)) {
                (Some(a), Some(b)) if a < b => {}
                _ => {
                    return Err(Error::Config(format!(
                        "edge {} is not forward in node order",
                        e.prefix()
                    )))
                }
            }
        }
        for n in &self.nodes {
            let fan_in = self.incoming(n.kind).count();
            let ok = match n.kind.input_modality() {
                Some(m) => fan_in == 0 && self.has_input(m),
                None if n.kind == NodeKind::FusionConcat => fan_in >= 2,
                None => fan_in == 1,
            };
            if !ok {
                return Err(Error::Config(format!(
                    "node {} of architecture {} has invalid fan-in {fan_in}",
                    n.kind.as_str(),
                    self.id
                )));
            }
        }
        Ok(())
    }

    /// Canonical JSON description of the graph.
    pub fn describe(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Widest bottleneck over all paths from `from` to `to`: the largest
    /// value, over paths, of the narrowest layer strictly between the two
    /// nodes. `None` when no path exists; `Some(usize::MAX)` when a path has
    /// no intermediate layer.
    pub fn bottleneck_width(&self, from: NodeKind, to: NodeKind) -> Option<usize> {
        if from == to {
            return Some(usize::MAX);
        }
        let mut best: Option<usize> = None;
        for e in self.edges.iter().filter(|e| e.from == from) {
            let (hidden, last) = match e.widths.split_last() {
                Some((l, h)) => (h.iter().copied().min().unwrap_or(usize::MAX), Some(*l)),
                None => (usize::MAX, None),
            };
            let path = if e.to == to {
                Some(hidden)
            } else {
                let node_width = self.node(e.to).map_or(usize::MAX, |n| n.width);
                let through = last.map_or(node_width, |l| l.min(node_width));
                self.bottleneck_width(e.to, to).map(|rest| hidden.min(through).min(rest))
            };
            best = match (best, path) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
        }
        best
    }
}

fn infer_nodes(edges: &[EdgeSpec], d: usize) -> Result<Vec<NodeSpec>> {
    use NodeKind::*;
    let order = [
        TextEmbedding,
        AppraisalRatings,
        EmotionRatings,
        AppraisalHead,
        EmotionHead,
        FusionConcat,
        PcbHead,
    ];
    let mut nodes: Vec<NodeSpec> = Vec::new();
    for kind in order {
        let present = edges.iter().any(|e| e.from == kind || e.to == kind);
        if !present {
            continue;
        }
        let width = match kind {
            TextEmbedding => d,
            AppraisalRatings => APPRAISAL_COUNT,
            EmotionRatings => EMOTION_COUNT,
            _ => {
                let mut w = 0;
                for e in edges.iter().filter(|e| e.to == kind) {
                    w += match e.widths.last() {
                        Some(&l) => l,
                        None => nodes
                            .iter()
                            .find(|n| n.kind == e.from)
                            .ok_or_else(|| Error::Config(format!("edge {} starts at an unknown node", e.prefix())))?
                            .width,
                    };
                }
                w
            }
        };
        let expected = match kind {
            AppraisalHead => Some(APPRAISAL_LOGITS),
            EmotionHead => Some(EMOTION_COUNT),
            PcbHead => Some(PCB_CLASSES),
            _ => None,
        };
        if let Some(x) = expected.filter(|&x| x != width) {
            return Err(Error::Config(format!("{} must be {x} wide, got {width}", kind.as_str())));
        }
        nodes.push(NodeSpec { kind, width });
    }
    Ok(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_id_is_config_error() {
        assert!(matches!(ArchitectureSpec::for_id(13, 128), Err(Error::Config(_))));
        assert!(matches!(ArchitectureSpec::for_id(0, 128), Err(Error::Config(_))));
    }

    #[test]
    fn theoretical_fusion_width() {
        let s = ArchitectureSpec::for_id(12, 128).unwrap();
        assert_eq!(s.node(NodeKind::FusionConcat).unwrap().width, 196);
    }

    #[test]
    fn descriptions_distinct_and_seed_free() {
        let all: Vec<String> = ARCHITECTURE_IDS
            .map(|k| ArchitectureSpec::for_id(k, 128).unwrap().describe())
            .collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert_ne!(all[i], all[j], "{} vs {}", i + 1, j + 1);
            }
        }
    }

    #[test]
    fn bottlenecks() {
        let b = |k| {
            ArchitectureSpec::for_id(k, 128)
                .unwrap()
                .bottleneck_width(NodeKind::TextEmbedding, NodeKind::PcbHead)
        };
        assert_eq!(b(1), Some(usize::MAX));
        assert_eq!(b(4), Some(60));
        assert_eq!(b(5), Some(8));
        assert_eq!(b(6), Some(8));
        assert_eq!(b(10), Some(188));
        assert_eq!(b(12), Some(196));
        assert_eq!(b(2), None);
    }

    #[test]
    fn multi_modal_components() {
        assert_eq!(ArchitectureSpec::for_id(9, 128).unwrap().components(), vec![1, 2, 3]);
        assert_eq!(ArchitectureSpec::for_id(7, 32).unwrap().node(NodeKind::FusionConcat).unwrap().width, 544);
        assert!(ArchitectureSpec::for_id(10, 128).unwrap().components().is_empty());
    }
}
