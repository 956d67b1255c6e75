#include "ostop/cli.hpp"

int main(int argc, char** argv) { return ostop::cli::run(argc, argv); }
