# Core module for narrownet
# Provides the unified task execution layer and the run scheduler
