// benchmark fixtures live in benches/
