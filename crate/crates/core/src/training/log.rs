use crate::report::{format_opt, Table};

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based, continuing across stages.
    pub epoch: usize,
    /// Mean reconstruction loss over the epoch's training batches.
    pub loss_r: Option<f64>,
    /// Mean classification loss over the epoch's training batches.
    pub loss_c: Option<f64>,
    /// Eval-mode accuracy on the labeled training set after the epoch.
    pub train_acc: Option<f64>,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    pub warm_start: bool,
    /// Whether the last stage ended by the stopping rule.
    pub stopped_early: bool,
    /// Number of leading records that belong to the reconstruction stage of
    /// a two-stage run.
    pub stage1_epochs: Option<usize>,
}

impl TrainLog {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn loss_r_history(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.loss_r).collect()
    }

    pub fn loss_c_history(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.loss_c).collect()
    }

    /// Equality ignoring wall-clock times.
    pub fn same_trajectory(&self, other: &TrainLog) -> bool {
        self.records.len() == other.records.len()
            && self.warm_start == other.warm_start
            && self.stage1_epochs == other.stage1_epochs
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.epoch == b.epoch
                    && bits(a.loss_r) == bits(b.loss_r)
                    && bits(a.loss_c) == bits(b.loss_c)
                    && bits(a.train_acc) == bits(b.train_acc)
            })
    }

    /// `epoch,loss_r,loss_c,train_acc,wall_ms`; missing values are empty.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["epoch", "loss_r", "loss_c", "train_acc", "wall_ms"]);
        for r in &self.records {
            t.push(vec![
                r.epoch.to_string(),
                format_opt(r.loss_r),
                format_opt(r.loss_c),
                format_opt(r.train_acc),
                r.wall_ms.to_string(),
            ])
            .expect("five columns");
        }
        t
    }

    pub fn to_csv(&self) -> String {
        self.to_table().to_csv()
    }
}

fn bits(x: Option<f64>) -> Option<u64> {
    x.map(f64::to_bits)
}
