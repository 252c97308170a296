#pragma once

#include "assert_rag/augment.hpp"
#include "assert_rag/corpus.hpp"
#include "assert_rag/dense_retriever.hpp"
#include "assert_rag/error.hpp"
#include "assert_rag/harness.hpp"
#include "assert_rag/hybrid_retriever.hpp"
#include "assert_rag/index_store.hpp"
#include "assert_rag/metrics.hpp"
#include "assert_rag/mini_ast.hpp"
#include "assert_rag/remote.hpp"
#include "assert_rag/report.hpp"
#include "assert_rag/sparse_retriever.hpp"
#include "assert_rag/tokenize.hpp"
