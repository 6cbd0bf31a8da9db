//! Summation and percentage rendering.

/// Neumaier-compensated running sum.
///
/// Aggregates over millions of elements stay within a few ulps of the exact
/// sum, and the result depends only on the order of `add` calls.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        s.extend(iter);
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Rounds a fraction to a percentage with two decimals, half away from zero.
///
/// Float noise below 1e-6 percentage points is snapped away first so that an
/// exact tie such as -9/32 renders as -28.13 rather than depending on the last
/// bit of the computation.
pub fn percent_hundredths(fraction: f64) -> i64 {
    let hundredths = fraction * 10_000.0;
    let snapped = (hundredths * 1e4).round() / 1e4;
    snapped.round() as i64
}

/// Two-decimal percentage string without the `%` sign, e.g. `-28.13`.
pub fn format_percent(fraction: f64) -> String {
    let h = percent_hundredths(fraction);
    let sign = if h < 0 { "-" } else { "" };
    let a = h.unsigned_abs();
    format!("{sign}{}.{:02}", a / 100, a % 100)
}
