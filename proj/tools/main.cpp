#include "difcon/report.hpp"

int main(int argc, char** argv) { return difcon::run_cli(argc, argv); }
