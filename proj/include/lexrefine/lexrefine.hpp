#pragma once

#include <lexrefine/annotation.hpp>
#include <lexrefine/conet.hpp>
#include <lexrefine/corpus.hpp>
#include <lexrefine/error.hpp>
#include <lexrefine/io.hpp>
#include <lexrefine/judge.hpp>
#include <lexrefine/lexicon.hpp>
#include <lexrefine/random.hpp>
#include <lexrefine/rankdiff.hpp>
#include <lexrefine/sample.hpp>
#include <lexrefine/service.hpp>
#include <lexrefine/synthetic.hpp>
#include <lexrefine/tagger.hpp>
#include <lexrefine/text.hpp>
