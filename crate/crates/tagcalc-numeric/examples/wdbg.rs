use tagcalc_numeric::grid::Grid;
use tagcalc_numeric::operator::NumericOperator;
use tagcalc_numeric::wigner::wigner_of_operator;
use tagcalc_numeric::C64;

fn main() {
    let g = Grid::new(512, 20.0).unwrap();
    let mut id = NumericOperator::zeros(&g);
    for i in 0..g.n {
        id.set(i, i, C64::new(1.0 / g.dx, 0.0));
    }
    let map = wigner_of_operator(&id);
    // probe a grid of (q, p) points in the interior
    for (qi, pi) in [(256usize, 256usize), (256, 260), (260, 256), (300, 256), (256, 300), (300, 300), (301, 300), (300, 301)] {
        let v = map.value(qi, pi);
        println!("q={:+.3} p={:+.3}  W={:+.6} {:+.6}i", map.q[qi], map.p[pi], v.re, v.im);
    }
}
