// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header: the whole compiler and simulator stack.

#pragma once

#include "spada/ast.hpp"
#include "spada/bench.hpp"
#include "spada/canonicalize.hpp"
#include "spada/channels.hpp"
#include "spada/checkerboard.hpp"
#include "spada/compile.hpp"
#include "spada/diag.hpp"
#include "spada/emit.hpp"
#include "spada/hb.hpp"
#include "spada/hostbuf.hpp"
#include "spada/lexer.hpp"
#include "spada/machine.hpp"
#include "spada/order.hpp"
#include "spada/parser.hpp"
#include "spada/pipeline.hpp"
#include "spada/printer.hpp"
#include "spada/routing.hpp"
#include "spada/sema.hpp"
#include "spada/stencil.hpp"
#include "spada/subgrid.hpp"
#include "spada/taskgraph.hpp"
#include "spada/typecheck.hpp"
