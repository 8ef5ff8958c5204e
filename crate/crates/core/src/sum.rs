use num_complex::Complex64;

/// Neumaier-compensated accumulator for real and imaginary parts.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    re: f64,
    re_c: f64,
    im: f64,
    im_c: f64,
}

#[inline]
fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, z: Complex64) {
        neumaier(&mut self.re, &mut self.re_c, z.re);
        neumaier(&mut self.im, &mut self.im_c, z.im);
    }

    #[inline]
    pub(crate) fn value(&self) -> Complex64 {
        Complex64::new(self.re + self.re_c, self.im + self.im_c)
    }
}

impl FromIterator<Complex64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        for z in iter {
            acc.add(z);
        }
        acc
    }
}

pub(crate) fn csum<I: IntoIterator<Item = Complex64>>(iter: I) -> Complex64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

pub(crate) fn rsum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    csum(iter.into_iter().map(|x| Complex64::new(x, 0.0))).re
}
