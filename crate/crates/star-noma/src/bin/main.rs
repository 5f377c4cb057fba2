fn main() {
    std::process::exit(star_noma::run());
}
