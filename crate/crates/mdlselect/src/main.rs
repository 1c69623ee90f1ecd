fn main() {
    std::process::exit(mdlselect::cli::run());
}
