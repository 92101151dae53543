#pragma once

#define GHOSTDIFF_VERSION "1.0.0"
