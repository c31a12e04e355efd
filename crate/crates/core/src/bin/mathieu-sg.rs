fn main() {
    let code = mathieu_sg::shell::run(std::env::args_os());
    std::process::exit(code);
}
