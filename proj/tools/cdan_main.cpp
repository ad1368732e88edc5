/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include <iostream>

#include "cdan/cli.hpp"

int main(int argc, char** argv) { return cdan::run_cli(argc, argv, std::cout, std::cerr); }
