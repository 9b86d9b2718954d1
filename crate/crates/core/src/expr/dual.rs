use std::ops::{Add, Div, Mul, Neg, Sub};

/// Forward-mode dual number carrying partials with respect to `x` and `y`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DualValue {
    pub value: f64,
    pub dx: f64,
    pub dy: f64,
}

impl DualValue {
    pub const fn new(value: f64, dx: f64, dy: f64) -> Self {
        DualValue { value, dx, dy }
    }

    pub const fn constant(value: f64) -> Self {
        DualValue::new(value, 0.0, 0.0)
    }

    pub const fn var_x(value: f64) -> Self {
        DualValue::new(value, 1.0, 0.0)
    }

    pub const fn var_y(value: f64) -> Self {
        DualValue::new(value, 0.0, 1.0)
    }

    /// Chain rule for a scalar function with value `fv` and derivative `dfv`.
    pub fn chain(self, fv: f64, dfv: f64) -> Self {
        DualValue::new(fv, dfv * self.dx, dfv * self.dy)
    }

    pub fn has_gradient(&self) -> bool {
        self.dx != 0.0 || self.dy != 0.0
    }
}

impl Add for DualValue {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        DualValue::new(self.value + o.value, self.dx + o.dx, self.dy + o.dy)
    }
}

impl Sub for DualValue {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        DualValue::new(self.value - o.value, self.dx - o.dx, self.dy - o.dy)
    }
}

impl Mul for DualValue {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        DualValue::new(
            self.value * o.value,
            self.dx * o.value + self.value * o.dx,
            self.dy * o.value + self.value * o.dy,
        )
    }
}

impl Div for DualValue {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.value / o.value;
        DualValue::new(q, (self.dx - q * o.dx) / o.value, (self.dy - q * o.dy) / o.value)
    }
}

impl Neg for DualValue {
    type Output = Self;
    fn neg(self) -> Self {
        DualValue::new(-self.value, -self.dx, -self.dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_quotient_rules() {
        let x = DualValue::var_x(3.0);
        let y = DualValue::var_y(2.0);
        let p = x * y;
        assert_eq!((p.value, p.dx, p.dy), (6.0, 2.0, 3.0));
        let q = x / y;
        assert_eq!((q.value, q.dx, q.dy), (1.5, 0.5, -0.75));
    }
}
